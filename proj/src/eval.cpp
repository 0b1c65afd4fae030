#include "hpmn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "hpmn/predictor.hpp"

namespace hpmn {

namespace {

// Midranks (1-based) of `values`; tied values share the average rank.
std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double tie_term(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    total += t * t * t - t;
    i = j + 1;
  }
  return total;
}

constexpr std::size_t kExactLimit = 20;

// Exact two-sided permutation p-value of the rank sum of the first group.
double exact_p_value(std::span<const double> ranks, std::size_t n_a, double observed_rank_sum) {
  const std::size_t n = ranks.size();
  std::vector<long> doubled(n);
  long total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    doubled[i] = std::lround(2.0 * ranks[i]);
    total += doubled[i];
  }
  // ways[k][s]: subsets of size k with doubled rank sum s.
  std::vector<std::vector<double>> ways(n_a + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = std::min(i + 1, n_a); k >= 1; --k) {
      auto& dst = ways[k];
      const auto& src = ways[k - 1];
      for (long s = total; s >= doubled[i]; --s) {
        dst[static_cast<std::size_t>(s)] += src[static_cast<std::size_t>(s - doubled[i])];
      }
    }
  }
  const long center2 = static_cast<long>(n_a) * static_cast<long>(n + 1);  // 2 * E[rank sum]
  const long observed_dev = std::labs(std::lround(2.0 * observed_rank_sum) - center2);
  double extreme = 0.0;
  double all = 0.0;
  for (long s = 0; s <= total; ++s) {
    const double w = ways[n_a][static_cast<std::size_t>(s)];
    if (w == 0.0) continue;
    all += w;
    if (std::labs(s - center2) >= observed_dev) extreme += w;
  }
  return std::min(1.0, extreme / all);
}

}  // namespace

std::size_t ScoredSet::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

double auc(const ScoredSet& s) {
  if (s.labels.size() != s.scores.size()) throw std::invalid_argument("auc: labels/scores size mismatch");
  const std::size_t pos = s.positives();
  const std::size_t neg = s.size() - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("auc: need at least one positive and one negative");
  const auto ranks = midranks(s.scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.labels[i] == 1) rank_sum += ranks[i];
  }
  const double np = static_cast<double>(pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(neg));
}

double logloss(const ScoredSet& s) {
  if (s.labels.size() != s.scores.size()) throw std::invalid_argument("logloss: labels/scores size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) total += cross_entropy(s.labels[i], s.scores[i]);
  return total;
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) rank_sum += ranks[i];

  TestResult r;
  r.statistic = rank_sum - na * (na + 1.0) / 2.0;
  if (a.size() <= kExactLimit && b.size() <= kExactLimit) {
    r.p_value = exact_p_value(ranks, a.size(), rank_sum);
    return r;
  }
  const double n = na + nb;
  const double mean = na * nb / 2.0;
  const double var = na * nb / 12.0 * ((n + 1.0) - tie_term(pooled) / (n * (n - 1.0)));
  if (var <= 0.0) {
    r.p_value = 1.0;
    return r;
  }
  const double z = std::max(0.0, std::abs(r.statistic - mean) - 0.5) / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

TestResult t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("t_test: need at least 2 values per sample");
  auto moments = [](std::span<const double> x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / static_cast<double>(x.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  if (va == 0.0 && vb == 0.0) throw std::invalid_argument("t_test: both samples have zero variance");
  const double sa = va / static_cast<double>(a.size());
  const double sb = vb / static_cast<double>(b.size());
  const double se = std::sqrt(sa + sb);
  TestResult r;
  r.statistic = (ma - mb) / se;
  const double df = (sa + sb) * (sa + sb) /
                    (sa * sa / static_cast<double>(a.size() - 1) + sb * sb / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(df);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.statistic))));
  return r;
}

MetricsReport metrics(const ScoredSet& s) {
  MetricsReport m;
  m.n = s.size();
  m.positives = s.positives();
  m.auc = auc(s);
  m.logloss = logloss(s);
  return m;
}

std::string to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["auc"] = report.auc;
  j["logloss"] = report.logloss;
  j["n"] = report.n;
  j["positives"] = report.positives;
  return j.dump();
}

}  // namespace hpmn
