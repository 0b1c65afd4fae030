// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "hpmn/baseline.hpp"
#include "hpmn/eval.hpp"
#include "hpmn/model.hpp"
#include "hpmn/store.hpp"
#include "hpmn/trainer.hpp"

namespace {

using namespace hpmn;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

Vector random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

ModelConfig config_for(const SyntheticConfig& data, std::vector<std::int64_t> periods, std::size_t memory_dim,
                       std::size_t embed_dim) {
  ModelConfig c;
  c.vocab = synthetic_vocab(data);
  c.schedule = UpdateSchedule{std::move(periods)};
  c.memory_dim = memory_dim;
  c.embed_dim = embed_dim;
  return c;
}

// Small model of criteria 1 and 9: D=3, p=8, embed_dim=8, T=16, batch of 4.
SyntheticConfig gradcheck_data() {
  SyntheticConfig d;
  d.n_users = 4;
  d.seq_len = 16;
  d.seed = 1;
  return d;
}

const LossWeights kCheckWeights{1e-3, 1e-4};

double worst_error(const GradCheckReport& r) {
  double worst = 0.0;
  for (const auto& t : r.tensors) worst = std::max(worst, t.max_relative_error);
  return worst;
}

Verdict gradient_correctness() {
  const auto t0 = Clock::now();
  const SyntheticConfig d = gradcheck_data();
  const HpmnModel model = HpmnModel::create(config_for(d, {1, 2, 4}, 8, 8), 1);
  const auto batch = generate_synthetic(d);
  const GradCheckReport r = grad_check_model(model, std::span<const Sample>(batch), kCheckWeights);
  const double secs = seconds_since(t0);
  return {r.passed && secs < 60.0,
          fmt("%zu tensors, max rel err %.2e (tol 1e-4), %.1f s (limit 60 s)", r.tensors.size(), worst_error(r),
              secs)};
}

Verdict stream_batch_equivalence() {
  SyntheticConfig d;
  d.n_users = 100;
  d.seed = 2;
  const HpmnModel model = HpmnModel::create(config_for(d, {1, 2, 4}, 32, 16), 2);
  const auto samples = generate_synthetic(d);
  MemoryStore store(model.fingerprint());
  std::size_t mismatches = 0;
  for (const auto& s : samples) {
    for (const auto& e : s.sequence.events) store.ingest(s.sequence.user_id, e, model);
    const Scored online = store.query(s.sequence.user_id, s.target, s.context, s.sequence.user_side, model);
    const MemoryPool pool = run_sequence(model.core, model.config.schedule, model.embed_history(s.sequence));
    const Vector query = embed_query(s.target, model.tables);
    const ReadResult rd = read(pool, model.core.energy, query);
    const double offline = predict(model.predictor, rd.representation, query, embed_context(s.context, model.tables),
                                   embed_user_side(s.sequence.user_side, model.tables));
    if (online.probability != offline || online.weights != rd.weights ||
        store.snapshot(s.sequence.user_id)->pool != pool) {
      ++mismatches;
    }
  }
  return {mismatches == 0, fmt("%zu users x %zu events, %zu bitwise mismatches", samples.size(),
                               samples.front().sequence.events.size(), mismatches)};
}

Verdict schedule_law() {
  std::size_t checks = 0, failures = 0;
  std::mt19937_64 rng(3);
  for (const std::vector<std::int64_t>& periods :
       {std::vector<std::int64_t>{1, 2, 4}, std::vector<std::int64_t>{1, 2, 4, 8, 16, 32}}) {
    const UpdateSchedule schedule{periods};
    CoreParams params;
    Rng init(3);
    for (std::size_t j = 0; j < periods.size(); ++j) params.layers.push_back(init_gru_layer(j == 0 ? 3 : 4, 4, init));
    for (std::int64_t T : {7, 64, 100, 1000}) {
      std::vector<std::int64_t> due(periods.size(), 0), changed(periods.size(), 0);
      MemoryPool pool = MemoryPool::zeros(periods.size(), 4);
      for (std::int64_t i = 1; i <= T; ++i) {
        for (std::size_t j : layers_due(schedule, i)) ++due[j];
        const MemoryPool next = step(pool, params, schedule, random_vector(rng, 3));
        for (std::size_t j = 0; j < periods.size(); ++j) changed[j] += next.slots[j] != pool.slots[j];
        pool = next;
      }
      for (std::size_t j = 0; j < periods.size(); ++j) {
        ++checks;
        const std::int64_t expected = T / periods[j];
        if (due[j] != expected || changed[j] != expected) ++failures;
      }
      if (pool.step_counter != T) ++failures;
    }
  }
  return {failures == 0, fmt("%zu (preset, T, layer) counts checked against floor(T/t), %zu wrong", checks, failures)};
}

double covariance_oracle(const MemoryPool& pool) {
  const std::size_t d = pool.layers(), p = pool.width();
  double loss = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) continue;
      double mi = 0.0, mj = 0.0;
      for (std::size_t k = 0; k < p; ++k) {
        mi += pool.slots[i][k] / static_cast<double>(p);
        mj += pool.slots[j][k] / static_cast<double>(p);
      }
      double c = 0.0;
      for (std::size_t k = 0; k < p; ++k) c += (pool.slots[i][k] - mi) * (pool.slots[j][k] - mj);
      c /= static_cast<double>(p);
      loss += 0.5 * c * c;
    }
  }
  return loss;
}

Verdict regularizer_oracle() {
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    MemoryPool pool = MemoryPool::zeros(2 + trial % 5, 3 + trial % 30);
    for (auto& s : pool.slots) s = random_vector(rng, s.size(), -3.0, 3.0);
    worst = std::max(worst, std::abs(covariance_loss(memory_covariance(pool)) - covariance_oracle(pool)));
  }
  MemoryPool single;
  single.slots = {random_vector(rng, 32)};
  MemoryPool uncorrelated;
  uncorrelated.slots = {{1.0, -1.0}, {1.0, 1.0}};
  const double d1 = covariance_loss(memory_covariance(single));
  const double un = covariance_loss(memory_covariance(uncorrelated));
  return {worst <= 1e-10 && d1 == 0.0 && un == 0.0,
          fmt("max |diff| vs oracle %.1e over 100 pools (tol 1e-10); D=1 -> %g; [[1,-1],[1,1]] -> %g", worst, d1, un)};
}

Verdict attention_contract() {
  std::mt19937_64 rng(5);
  Rng init(5);
  double worst_sum = 0.0, worst_identical = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + trial % 6, p = 2 + trial % 7, q = 3;
    const EnergyNet net = init_energy_net(p + q, 16, init);
    MemoryPool pool = MemoryPool::zeros(d, p);
    for (auto& s : pool.slots) s = random_vector(rng, p, -5.0, 5.0);
    const ReadResult r = read(pool, net, random_vector(rng, q));
    double sum = 0.0;
    for (double w : r.weights) sum += w;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    const Vector slot = random_vector(rng, p);
    std::fill(pool.slots.begin(), pool.slots.end(), slot);
    const ReadResult same = read(pool, net, random_vector(rng, q));
    for (std::size_t k = 0; k < p; ++k) worst_identical = std::max(worst_identical, std::abs(same.representation[k] - slot[k]));
  }
  const Vector sm = softmax(Vector{std::log(2.0), 0.0});
  // Energy net that returns the slot value itself: relu(m) with unit weights.
  EnergyNet pass = zero_energy_net(2, 1);
  pass.w1(0, 0) = 1.0;
  pass.w2(0, 0) = 1.0;
  MemoryPool two;
  two.slots = {{std::log(2.0)}, {0.0}};
  const ReadResult rd = read(two, pass, Vector{0.0});
  const double err = std::max({std::abs(sm[0] - 2.0 / 3.0), std::abs(sm[1] - 1.0 / 3.0),
                               std::abs(rd.weights[0] - 2.0 / 3.0), std::abs(rd.weights[1] - 1.0 / 3.0)});
  return {worst_sum <= 1e-12 && worst_identical <= 1e-12 && err <= 1e-15,
          fmt("max |sum w - 1| %.1e; identical slots max |r - m| %.1e; (ln 2, 0) -> (%.17g, %.17g)", worst_sum,
              worst_identical, rd.weights[0], rd.weights[1])};
}

Verdict metric_oracles() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScoredSet s;
  for (int i = 0; i < 200; ++i) s.add(u(rng) < 0.4 ? 1 : 0, std::round(u(rng) * 50.0) / 50.0 * 0.98 + 0.01);
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s.labels[i] != 1 || s.labels[j] != 0) continue;
      pairs += 1.0;
      wins += s.scores[i] > s.scores[j] ? 1.0 : (s.scores[i] == s.scores[j] ? 0.5 : 0.0);
    }
  }
  const double auc_err = std::abs(auc(s) - wins / pairs);

  std::vector<double> a(5), b(5);
  for (auto& x : a) x = u(rng) + 0.2;
  for (auto& x : b) x = u(rng);
  std::vector<double> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());
  auto u_of = [](const std::vector<double>& x, const std::vector<double>& y) {
    double v = 0.0;
    for (double xi : x) {
      for (double yj : y) v += xi > yj ? 1.0 : (xi == yj ? 0.5 : 0.0);
    }
    return v;
  };
  const double observed = u_of(a, b);
  double extreme = 0.0, total = 0.0;
  for (unsigned mask = 0; mask < 1024u; ++mask) {
    if (__builtin_popcount(mask) != 5) continue;
    std::vector<double> x, y;
    for (unsigned i = 0; i < 10; ++i) (mask >> i & 1u ? x : y).push_back(pool[i]);
    total += 1.0;
    if (std::abs(u_of(x, y) - 12.5) >= std::abs(observed - 12.5) - 1e-9) extreme += 1.0;
  }
  const TestResult mw = mann_whitney_u(a, b);
  const bool mw_ok = mw.statistic == observed && std::abs(mw.p_value - extreme / total) <= 1e-12;

  ScoredSet half;
  half.add(1, 0.5);
  const double ll = logloss(half);
  return {auc_err <= 1e-12 && mw_ok && std::abs(ll - 0.693147) <= 1e-6,
          fmt("AUC vs pairwise |diff| %.1e (n=200); U %g vs enumerated %g, p %.6f vs %.6f; logloss(1, 0.5) = %.6f",
              auc_err, mw.statistic, observed, mw.p_value, extreme / total, ll)};
}

// Generator and training settings shared by criteria 7, 8 and 10.
SyntheticConfig learning_data(std::size_t users, std::uint64_t seed) {
  SyntheticConfig d;
  d.n_users = users;
  d.seq_len = 100;
  d.n_items = 6;
  d.n_categories = 3;
  d.interests_per_user = 2;
  d.seed = seed;
  return d;
}

TrainConfig learning_train(std::uint64_t seed, double learning_rate) {
  TrainConfig t;
  t.learning_rate = learning_rate;
  t.batch_size = 16;
  t.lambda = 1e-4;
  t.mu = 1e-4;
  t.epochs = 8;
  t.seed = seed;
  t.schedule = UpdateSchedule{{1, 2, 4}};
  t.memory_dim = 32;
  t.embed_dim = 16;
  return t;
}

struct LearningRun {
  double hpmn_auc = 0.0, base_auc = 0.0;
  double hpmn_logloss = 0.0, base_logloss = 0.0;
  std::vector<double> train_loss;
};

std::vector<LearningRun> learning_runs;
double learning_seconds = 0.0;

void run_learning() {
  const auto t0 = Clock::now();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SyntheticConfig d = learning_data(1000, seed);
    const Dataset ds = split_by_time(generate_synthetic(d), 0.7);
    const ModelConfig mc = config_for(d, {1, 2, 4}, 32, 16);
    const TrainConfig tc = learning_train(seed, 1e-2);
    const auto h = fit(HpmnModel::create(mc, seed), ds.train, ds.test, tc, {true});
    const auto b = fit(SumPoolingModel::create(mc, seed), ds.train, ds.test, tc);
    learning_runs.push_back({h.best_auc, b.best_auc, h.best_logloss, b.best_logloss, h.train_loss_after_epoch});
  }
  learning_seconds = seconds_since(t0);
}

Verdict learning_effectiveness() {
  double ha = 0.0, ba = 0.0, hl = 0.0, bl = 0.0;
  std::ostringstream per_seed;
  for (const auto& r : learning_runs) {
    ha += r.hpmn_auc / 5.0;
    ba += r.base_auc / 5.0;
    hl += r.hpmn_logloss / 5.0;
    bl += r.base_logloss / 5.0;
    per_seed << fmt(" %.3f/%.3f", r.hpmn_auc, r.base_auc);
  }
  return {ha >= ba + 0.03 && hl < bl && learning_seconds < 600.0,
          fmt("mean AUC HPMN %.4f vs baseline %.4f (need +0.03); mean test logloss %.2f vs %.2f; %.0f s (limit 600 s);"
              " per seed",
              ha, ba, hl, bl, learning_seconds) +
              per_seed.str()};
}

Verdict convergence_shape() {
  bool ok = true;
  std::ostringstream detail;
  detail << "train loss epoch 1 -> 5 per seed:";
  for (const auto& r : learning_runs) {
    const double e1 = r.train_loss.at(0), e5 = r.train_loss.at(4);
    const double gap = std::abs(e1 - e5) / e5;
    ok = ok && gap <= 0.10;
    detail << fmt(" %.4f->%.4f (%.1f%%)", e1, e5, 100.0 * gap);
  }
  return {ok, detail.str()};
}

Verdict expansion_safety() {
  const SyntheticConfig d = gradcheck_data();
  const HpmnModel model = HpmnModel::create(config_for(d, {1, 2, 4}, 8, 8), 1);
  const auto batch = generate_synthetic(d);
  const MemoryPool pool = model.encode(batch.front().sequence);
  HpmnModel grown = model;
  grown.expand(8, 1);
  auto rng = stream_rng(1, 200 + model.config.schedule.layers());
  const Expansion e = expand(pool, model.core, model.config.schedule, 8, rng);
  bool kept = e.params == grown.core && e.schedule == grown.config.schedule && e.pool.layers() == 4 &&
              e.pool.step_counter == pool.step_counter && e.pool.slots[3] == Vector(8, 0.0) &&
              grown.core.energy == model.core.energy && grown.predictor == model.predictor &&
              grown.tables == model.tables;
  for (std::size_t j = 0; kept && j < 3; ++j) {
    kept = e.pool.slots[j] == pool.slots[j] && grown.core.layers[j] == model.core.layers[j];
  }
  const GradCheckReport r = grad_check_model(grown, std::span<const Sample>(batch), kCheckWeights);
  return {kept && r.passed, fmt("layers 1..3 slots and parameters %s; expanded gradcheck max rel err %.2e (%s)",
                                kept ? "bitwise unchanged" : "CHANGED", worst_error(r), r.passed ? "pass" : "fail")};
}

double mean_argmax_layer(const HpmnModel& model, const std::vector<Sample>& samples) {
  double total = 0.0;
  for (const auto& s : samples) {
    const Vector w = model.score(s).weights;
    total += static_cast<double>(std::max_element(w.begin(), w.end()) - w.begin());
  }
  return total / static_cast<double>(samples.size());
}

Verdict attention_signature() {
  double long_mean = 0.0, recent_mean = 0.0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SyntheticConfig d = learning_data(3000, seed);
    const Dataset ds = split_by_time(generate_synthetic(d), 0.7);
    const ModelConfig mc = config_for(d, {1, 2, 4}, 32, 16);
    const auto fitted = fit(HpmnModel::create(mc, seed), ds.train, ds.test, learning_train(seed, 3e-3));
    SyntheticConfig probe = learning_data(200, seed + 100);
    probe.plant = Plant::kLongRange;
    const double l = mean_argmax_layer(fitted.best_model, generate_synthetic(probe));
    probe.plant = Plant::kRecent;
    const double r = mean_argmax_layer(fitted.best_model, generate_synthetic(probe));
    long_mean += l / 5.0;
    recent_mean += r / 5.0;
    per_seed << fmt(" %.3f/%.3f", l, r);
  }
  return {long_mean > recent_mean,
          fmt("mean argmax layer (0-based) long-only %.3f vs recent-only %.3f; per seed", long_mean, recent_mean) +
              per_seed.str()};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"stream/batch equivalence", stream_batch_equivalence},
      {"periodic schedule law", schedule_law},
      {"regularizer oracle", regularizer_oracle},
      {"attention contract", attention_contract},
      {"metric oracles", metric_oracles},
      {"learning effectiveness",
       [] {
         run_learning();
         return learning_effectiveness();
       }},
      {"convergence shape", convergence_shape},
      {"expansion safety", expansion_safety},
      {"multi-scale attention signature", attention_signature},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first
              << "): " << v.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
