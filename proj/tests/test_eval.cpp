#include <cmath>
#include <random>

#include <json.hpp>
#include <gtest/gtest.h>

#include "hpmn/eval.hpp"
#include "hpmn/predictor.hpp"

namespace hpmn {
namespace {

ScoredSet random_set(std::mt19937_64& rng, std::size_t n, bool coarse) {
  std::uniform_real_distribution<double> u(0.01, 0.99);
  ScoredSet s;
  for (std::size_t i = 0; i < n; ++i) {
    double score = u(rng);
    if (coarse) score = std::round(score * 10.0) / 10.0;
    s.add(i % 3 == 0 ? 1 : 0, score);
  }
  return s;
}

double pairwise_auc(const ScoredSet& s) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.labels[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s.labels[j] != 0) continue;
      pairs += 1.0;
      if (s.scores[i] > s.scores[j]) wins += 1.0;
      if (s.scores[i] == s.scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

TEST(Auc, MatchesPairwiseCount) {
  std::mt19937_64 rng(1);
  for (bool coarse : {false, true}) {
    const ScoredSet s = random_set(rng, 200, coarse);
    EXPECT_NEAR(auc(s), pairwise_auc(s), 1e-12);
  }
}

TEST(Auc, SmallCases) {
  ScoredSet perfect;
  perfect.add(1, 0.9);
  perfect.add(0, 0.1);
  EXPECT_EQ(auc(perfect), 1.0);
  ScoredSet reversed;
  reversed.add(1, 0.1);
  reversed.add(0, 0.9);
  EXPECT_EQ(auc(reversed), 0.0);
  ScoredSet ties;
  for (int i = 0; i < 7; ++i) ties.add(i % 2, 0.3);
  EXPECT_EQ(auc(ties), 0.5);
}

TEST(Auc, SingleClassRejected) {
  ScoredSet s;
  s.add(1, 0.4);
  s.add(1, 0.6);
  EXPECT_THROW(auc(s), std::invalid_argument);
  EXPECT_THROW(auc(ScoredSet{}), std::invalid_argument);
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const ScoredSet s = random_set(rng, 50, trial % 2 == 0);
    ScoredSet t = s;
    for (auto& x : t.scores) x = std::log(x / (1.0 - x)) * 3.0 + 7.0;
    EXPECT_EQ(auc(s), auc(t));
  }
}

TEST(Logloss, KnownValues) {
  ScoredSet s;
  s.add(1, 0.5);
  EXPECT_NEAR(logloss(s), 0.693147, 1e-6);
  ScoredSet near_perfect;
  near_perfect.add(1, 1.0 - 1e-12);
  near_perfect.add(0, 1e-12);
  EXPECT_LT(logloss(near_perfect), 1e-10);
}

TEST(Logloss, IsSummedPerTermOracle) {
  std::mt19937_64 rng(3);
  const ScoredSet s = random_set(rng, 10, false);
  double oracle = 0.0, ce = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double y = s.labels[i], p = s.scores[i];
    oracle += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    ce += cross_entropy(s.labels[i], s.scores[i]);
  }
  EXPECT_NEAR(logloss(s), oracle, 1e-12);
  EXPECT_EQ(logloss(s), ce);
}

TEST(Logloss, BoundaryScoresRejected) {
  ScoredSet s;
  s.add(1, 0.0);
  EXPECT_THROW(logloss(s), std::domain_error);
  ScoredSet t;
  t.add(0, 1.0);
  EXPECT_THROW(logloss(t), std::domain_error);
}

struct Enumerated {
  double u;
  double p;
};

// Counts pairs directly and walks every way of choosing group a from the pool.
Enumerated enumerate_mw(const std::vector<double>& a, const std::vector<double>& b) {
  auto u_of = [](const std::vector<double>& x, const std::vector<double>& y) {
    double u = 0.0;
    for (double xi : x) {
      for (double yj : y) u += xi > yj ? 1.0 : (xi == yj ? 0.5 : 0.0);
    }
    return u;
  };
  std::vector<double> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());
  const double center = 0.5 * static_cast<double>(a.size() * b.size());
  const double observed = u_of(a, b);
  double extreme = 0.0, total = 0.0;
  const unsigned n = static_cast<unsigned>(pool.size());
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != a.size()) continue;
    std::vector<double> x, y;
    for (unsigned i = 0; i < n; ++i) (mask >> i & 1u ? x : y).push_back(pool[i]);
    total += 1.0;
    if (std::abs(u_of(x, y) - center) >= std::abs(observed - center) - 1e-9) extreme += 1.0;
  }
  return {observed, extreme / total};
}

TEST(MannWhitney, MatchesExhaustiveEnumeration) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(5), b(5);
    for (auto& x : a) x = u(rng) + 0.1 * trial / 20.0;
    for (auto& x : b) x = u(rng);
    if (trial % 4 == 0) b[0] = a[0];
    const Enumerated e = enumerate_mw(a, b);
    const TestResult r = mann_whitney_u(a, b);
    EXPECT_EQ(r.statistic, e.u);
    EXPECT_NEAR(r.p_value, e.p, 1e-12);
  }
}

TEST(MannWhitney, Basics) {
  const std::vector<double> a{1, 2}, b{3, 4};
  EXPECT_EQ(mann_whitney_u(a, b).statistic, 0.0);
  EXPECT_NEAR(mann_whitney_u(a, b).p_value, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(mann_whitney_u(a, a).p_value, 1.0, 1e-12);
  EXPECT_THROW(mann_whitney_u(a, std::vector<double>{}), std::invalid_argument);
}

TEST(MannWhitney, StatisticsAreComplementary) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (std::size_t na : {3u, 12u, 40u}) {
    std::vector<double> a(na), b(na + 7);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng) + 0.3;
    EXPECT_EQ(mann_whitney_u(a, b).statistic + mann_whitney_u(b, a).statistic,
              static_cast<double>(a.size() * b.size()));
    EXPECT_NEAR(mann_whitney_u(a, b).p_value, mann_whitney_u(b, a).p_value, 1e-12);
  }
}

TEST(MannWhitney, LargeSamplesSeparate) {
  std::vector<double> a(50), b(50);
  for (std::size_t i = 0; i < 50; ++i) {
    a[i] = static_cast<double>(i);
    b[i] = 100.0 + static_cast<double>(i);
  }
  const TestResult r = mann_whitney_u(a, b);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_LT(r.p_value, 1e-10);
  EXPECT_NEAR(mann_whitney_u(a, a).p_value, 1.0, 1e-12);
}

double t_density(double x, double nu) {
  return std::exp(std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0)) / std::sqrt(nu * M_PI) *
         std::pow(1.0 + x * x / nu, -(nu + 1.0) / 2.0);
}

// Welch statistic from the textbook formulas; p by Simpson integration of the density.
TestResult welch_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  auto mean = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
  };
  auto var = [&](const std::vector<double>& x) {
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
  };
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double qa = var(a) / na, qb = var(b) / nb;
  const double t = (mean(a) - mean(b)) / std::sqrt(qa + qb);
  const double nu = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  const int steps = 200000;
  const double hi = std::abs(t), h = hi / steps;
  double acc = t_density(0.0, nu) + t_density(hi, nu);
  for (int k = 1; k < steps; ++k) acc += (k % 2 ? 4.0 : 2.0) * t_density(k * h, nu);
  return {t, 1.0 - 2.0 * acc * h / 3.0};
}

TEST(TTest, MatchesFormulaOracle) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> a(6 + trial), b(9);
    for (auto& x : a) x = g(rng) * 2.0 + 0.5;
    for (auto& x : b) x = g(rng);
    const TestResult r = t_test(a, b);
    const TestResult o = welch_oracle(a, b);
    EXPECT_NEAR(r.statistic, o.statistic, 1e-10);
    EXPECT_NEAR(r.p_value, o.p_value, 1e-10);
  }
}

TEST(TTest, Basics) {
  const std::vector<double> a{0.1, 0.4, 0.2, 0.9};
  const TestResult same = t_test(a, a);
  EXPECT_EQ(same.statistic, 0.0);
  EXPECT_NEAR(same.p_value, 1.0, 1e-12);
  const std::vector<double> lo{0.0, 0.001, -0.001, 0.0005}, hi{10.0, 10.001, 9.999, 10.0005};
  EXPECT_LT(t_test(lo, hi).p_value, 1e-6);
  EXPECT_LT(t_test(lo, hi).statistic, 0.0);
}

TEST(TTest, DegenerateInputsRejected) {
  const std::vector<double> c{1.0, 1.0, 1.0}, d{2.0, 2.0};
  EXPECT_THROW(t_test(c, d), std::invalid_argument);
  EXPECT_THROW(t_test(std::vector<double>{1.0}, d), std::invalid_argument);
  EXPECT_NO_THROW(t_test(c, std::vector<double>{1.0, 2.0}));
}

TEST(Metrics, JsonReport) {
  ScoredSet s;
  s.add(1, 0.8);
  s.add(0, 0.3);
  s.add(1, 0.6);
  const MetricsReport m = metrics(s);
  EXPECT_EQ(m.n, 3u);
  EXPECT_EQ(m.positives, 2u);
  EXPECT_EQ(m.auc, 1.0);
  const auto j = nlohmann::json::parse(to_json(m));
  EXPECT_EQ(j.at("n"), 3);
  EXPECT_EQ(j.at("positives"), 2);
  EXPECT_EQ(j.at("auc"), 1.0);
  EXPECT_NEAR(j.at("logloss").get<double>(), logloss(s), 1e-12);
}

}  // namespace
}  // namespace hpmn
