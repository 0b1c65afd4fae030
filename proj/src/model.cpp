#include "hpmn/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "hpmn/binary_io.hpp"
#include "hpmn/random.hpp"

namespace hpmn {

namespace {

constexpr char kCheckpointMagic[8] = {'H', 'P', 'M', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <class Self, class Fn>
void visit_params(Self& m, Fn&& fn) {
  fn("emb.item", m.tables.item.weights());
  fn("emb.category", m.tables.category.weights());
  fn("emb.side", m.tables.side.weights());
  fn("emb.context", m.tables.context.weights());
  fn("emb.user_side", m.tables.user_side.weights());
  for (std::size_t j = 0; j < m.core.layers.size(); ++j) {
    auto& g = m.core.layers[j];
    const std::string p = "gru" + std::to_string(j + 1) + ".";
    fn(p + "w_z", g.w_z);
    fn(p + "u_z", g.u_z);
    fn(p + "b_z", g.b_z);
    fn(p + "w_r", g.w_r);
    fn(p + "u_r", g.u_r);
    fn(p + "b_r", g.b_r);
    fn(p + "w_m", g.w_m);
    fn(p + "u_m", g.u_m);
    fn(p + "b_m", g.b_m);
  }
  fn("energy.w1", m.core.energy.w1);
  fn("energy.b1", m.core.energy.b1);
  fn("energy.w2", m.core.energy.w2);
  fn("energy.b2", m.core.energy.b2);
  for (std::size_t l = 0; l < m.predictor.layers.size(); ++l) {
    const std::string p = "mlp" + std::to_string(l + 1) + ".";
    fn(p + "w", m.predictor.layers[l].w);
    fn(p + "b", m.predictor.layers[l].b);
  }
}

template <class View, class T>
View make_view(const std::string& name, T& tensor) {
  if constexpr (requires { tensor.rows(); }) {
    return View{name, tensor.rows(), tensor.cols(), tensor.values()};
  } else {
    return View{name, tensor.size(), 1, tensor};
  }
}

void put_config(std::ostream& out, const ModelConfig& c) {
  for (auto v : {c.vocab.items, c.vocab.categories, c.vocab.side, c.vocab.context, c.vocab.user_side}) {
    io::put<std::int32_t>(out, v);
  }
  for (auto v : {c.layout.side_slots, c.layout.context_slots, c.layout.user_side_slots, c.embed_dim,
                 c.memory_dim, c.energy_hidden}) {
    io::put<std::uint64_t>(out, v);
  }
  io::put<std::uint64_t>(out, c.mlp_hidden.size());
  for (auto w : c.mlp_hidden) io::put<std::uint64_t>(out, w);
  io::put<std::uint64_t>(out, c.schedule.periods.size());
  for (auto t : c.schedule.periods) io::put<std::int64_t>(out, t);
  io::put<double>(out, c.gate_timescale);
}

ModelConfig get_config(std::istream& in) {
  ModelConfig c;
  c.vocab.items = io::get<std::int32_t>(in);
  c.vocab.categories = io::get<std::int32_t>(in);
  c.vocab.side = io::get<std::int32_t>(in);
  c.vocab.context = io::get<std::int32_t>(in);
  c.vocab.user_side = io::get<std::int32_t>(in);
  c.layout.side_slots = io::get<std::uint64_t>(in);
  c.layout.context_slots = io::get<std::uint64_t>(in);
  c.layout.user_side_slots = io::get<std::uint64_t>(in);
  c.embed_dim = io::get<std::uint64_t>(in);
  c.memory_dim = io::get<std::uint64_t>(in);
  c.energy_hidden = io::get<std::uint64_t>(in);
  const auto n_hidden = io::get<std::uint64_t>(in);
  if (n_hidden > 64) throw std::runtime_error("checkpoint: implausible MLP depth");
  c.mlp_hidden.resize(n_hidden);
  for (auto& w : c.mlp_hidden) w = io::get<std::uint64_t>(in);
  const auto n_periods = io::get<std::uint64_t>(in);
  if (n_periods == 0 || n_periods > 64) throw std::runtime_error("checkpoint: implausible layer count");
  c.schedule.periods.resize(n_periods);
  for (auto& t : c.schedule.periods) t = io::get<std::int64_t>(in);
  c.gate_timescale = io::get<double>(in);
  return c;
}

}  // namespace

double squared_norm(std::span<const ConstParamView> params) {
  double total = 0.0;
  for (const auto& p : params) total += squared_norm(p.values);
  return total;
}

void ModelConfig::validate() const {
  schedule.validate();
  if (embed_dim == 0 || memory_dim == 0 || energy_hidden == 0) {
    throw std::invalid_argument("model dimensions must be >= 1");
  }
  if (!(gate_timescale >= 0.0) || !std::isfinite(gate_timescale)) throw std::invalid_argument("gate_timescale must be finite and >= 0");
  if (vocab.items <= 0 || vocab.categories <= 0) {
    throw std::invalid_argument("item and category vocabularies must be non-empty");
  }
}

HpmnModel HpmnModel::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  HpmnModel m;
  m.config = config;
  m.tables = init_tables(config.vocab, config.layout, config.embed_dim, seed);
  auto rng = stream_rng(seed, 100);
  const std::size_t p = config.memory_dim;
  for (std::size_t j = 0; j < config.schedule.layers(); ++j) {
    m.core.layers.push_back(init_gru_layer(j == 0 ? config.event_width() : p, p, rng, config.gate_timescale));
  }
  m.core.energy = init_energy_net(p + config.event_width(), config.energy_hidden, rng);
  const std::size_t in = p + config.event_width() + m.tables.context_width() + m.tables.user_side_width();
  m.predictor = init_predictor(in, config.mlp_hidden, rng);
  return m;
}

HpmnModel HpmnModel::zeros_like() const {
  HpmnModel z;
  z.config = config;
  z.tables = hpmn::zeros_like(tables);
  z.core = hpmn::zeros_like(core);
  z.predictor = hpmn::zeros_like(predictor);
  return z;
}

std::vector<ParamView> HpmnModel::parameters() {
  std::vector<ParamView> out;
  visit_params(*this, [&](const std::string& name, auto& t) { out.push_back(make_view<ParamView>(name, t)); });
  return out;
}

std::vector<ConstParamView> HpmnModel::parameters() const {
  std::vector<ConstParamView> out;
  visit_params(*this, [&](const std::string& name, const auto& t) {
    out.push_back(make_view<ConstParamView>(name, t));
  });
  return out;
}

std::string HpmnModel::fingerprint() const {
  std::uint64_t h = fnv1a("hpmn");
  auto mix = [&](const void* data, std::size_t n) {
    h = fnv1a(std::string_view(static_cast<const char*>(data), n), h);
  };
  for (auto t : config.schedule.periods) mix(&t, sizeof(t));
  for (const auto& p : parameters()) {
    mix(p.name.data(), p.name.size());
    mix(p.values.data(), p.values.size_bytes());
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<Vector> HpmnModel::embed_history(const UserSequence& sequence) const {
  std::vector<Vector> events;
  events.reserve(sequence.events.size());
  for (const auto& e : sequence.events) events.push_back(embed_event(e, tables));
  return events;
}

MemoryPool HpmnModel::encode(const UserSequence& sequence) const {
  return run_sequence(core, config.schedule, embed_history(sequence));
}

Scored HpmnModel::score_pool(const MemoryPool& pool, const BehaviorEvent& target,
                             std::span<const std::int32_t> context,
                             std::span<const std::int32_t> user_side) const {
  const Vector query = embed_query(target, tables);
  const Vector ctx = embed_context(context, tables);
  const Vector usr = embed_user_side(user_side, tables);
  ReadResult rd = read(pool, core.energy, query);
  Scored s;
  s.probability = predict(predictor, rd.representation, query, ctx, usr);
  s.weights = std::move(rd.weights);
  return s;
}

Scored HpmnModel::score(const Sample& sample) const {
  return score_pool(encode(sample.sequence), sample.target, sample.context, sample.sequence.user_side);
}

double HpmnModel::batch_loss(std::span<const Sample> batch, const LossWeights& weights) const {
  std::vector<double> ce;
  std::vector<Matrix> cov;
  for (const auto& s : batch) {
    const MemoryPool pool = encode(s.sequence);
    ce.push_back(cross_entropy(s.label, score_pool(pool, s.target, s.context, s.sequence.user_side).probability));
    cov.push_back(memory_covariance(pool));
  }
  const auto params = parameters();
  return total_loss(ce, cov, squared_norm(params), weights.lambda, weights.mu);
}

double HpmnModel::accumulate_gradients(std::span<const Sample> batch, const LossWeights& weights,
                                       HpmnModel& grads) const {
  if (batch.empty()) return 0.0;
  const std::size_t p = config.memory_dim;
  const std::size_t ew = config.event_width();
  const std::size_t cw = tables.context_width();
  const double cov_scale = weights.lambda / static_cast<double>(batch.size());

  double ce_sum = 0.0;
  double cov_sum = 0.0;
  for (const auto& s : batch) {
    const auto events = embed_history(s.sequence);
    SequenceTrace trace;
    const MemoryPool pool = run_sequence_traced(core, config.schedule, events, trace);

    const Vector query = embed_query(s.target, tables);
    const Vector ctx = embed_context(s.context, tables);
    const Vector usr = embed_user_side(s.sequence.user_side, tables);
    ReadCache read_cache;
    const ReadResult rd = read(pool, core.energy, query, &read_cache);
    MlpCache mlp_cache;
    const Vector input = concat({rd.representation, query, ctx, usr});
    const double prob = predict_input(predictor, input, &mlp_cache);
    ce_sum += cross_entropy(s.label, prob);
    cov_sum += covariance_loss(memory_covariance(pool));

    const Vector d_input = predict_backward(predictor, mlp_cache, s.label, 1.0, grads.predictor);
    const std::span<const double> d_in(d_input);
    const auto d_repr = d_in.subspan(0, p);
    Vector d_query(d_in.begin() + static_cast<std::ptrdiff_t>(p),
                   d_in.begin() + static_cast<std::ptrdiff_t>(p + ew));
    const auto d_ctx = d_in.subspan(p + ew, cw);
    const auto d_usr = d_in.subspan(p + ew + cw);

    ReadGrads rg = read_backward(pool, core.energy, rd, read_cache, d_repr, grads.core.energy);
    add_into(d_query, rg.d_query);
    if (cov_scale != 0.0) {
      const auto d_cov = covariance_loss_grad(pool);
      for (std::size_t j = 0; j < d_cov.size(); ++j) {
        for (std::size_t k = 0; k < p; ++k) rg.d_slots[j][k] += cov_scale * d_cov[j][k];
      }
    }
    const auto d_events = run_sequence_backward(core, trace, std::move(rg.d_slots), grads.core);
    for (std::size_t i = 0; i < d_events.size(); ++i) {
      embed_event_backward(s.sequence.events[i], d_events[i], grads.tables);
    }
    embed_event_backward(s.target, d_query, grads.tables);
    embed_context_backward(s.context, d_ctx, grads.tables);
    embed_user_side_backward(s.sequence.user_side, d_usr, grads.tables);
  }

  const auto params = parameters();
  double norm = 0.0;
  if (weights.mu != 0.0) {
    auto g = grads.parameters();
    for (std::size_t t = 0; t < params.size(); ++t) {
      norm += hpmn::squared_norm(params[t].values);
      for (std::size_t k = 0; k < params[t].values.size(); ++k) {
        g[t].values[k] += weights.mu * params[t].values[k];
      }
    }
  }
  return ce_sum + cov_scale * cov_sum + 0.5 * weights.mu * norm;
}

void HpmnModel::expand(std::int64_t new_period, std::uint64_t seed) {
  auto rng = stream_rng(seed, 200 + config.schedule.layers());
  expand_model(core, config.schedule, new_period, rng, config.gate_timescale);
}

void save_checkpoint(const std::filesystem::path& path, const HpmnModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  io::put<std::uint32_t>(out, kCheckpointVersion);
  put_config(out, model.config);
  const auto params = model.parameters();
  io::put<std::uint64_t>(out, params.size());
  for (const auto& p : params) {
    io::put_string(out, p.name);
    io::put<std::uint64_t>(out, p.rows);
    io::put<std::uint64_t>(out, p.cols);
    io::put_doubles(out, p.values);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

HpmnModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic)) || !std::equal(magic, magic + sizeof(magic), kCheckpointMagic)) {
    throw std::runtime_error(path.string() + " is not a model checkpoint");
  }
  const auto version = io::get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const ModelConfig config = get_config(in);
  HpmnModel model = HpmnModel::create(config, 0).zeros_like();
  auto params = model.parameters();
  const auto count = io::get<std::uint64_t>(in);
  if (count != params.size()) {
    throw std::runtime_error("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                             std::to_string(params.size()));
  }
  for (auto& p : params) {
    const auto name = io::get_string(in);
    const auto rows = io::get<std::uint64_t>(in);
    const auto cols = io::get<std::uint64_t>(in);
    if (name != p.name || rows != p.rows || cols != p.cols) {
      throw std::runtime_error("checkpoint tensor " + name + " does not match expected " + p.name);
    }
    io::get_doubles(in, p.values);
  }
  return model;
}

}  // namespace hpmn
