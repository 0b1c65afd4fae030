#pragma once

#include <span>
#include <string>
#include <vector>

namespace hpmn {

struct ScoredSet {
  std::vector<int> labels;
  std::vector<double> scores;

  void add(int label, double score) {
    labels.push_back(label);
    scores.push_back(score);
  }
  std::size_t size() const { return labels.size(); }
  std::size_t positives() const;
};

/// Mann-Whitney AUC: P(score of a random positive > a random negative), ties
/// count one half. Throws when either class is missing.
double auc(const ScoredSet& s);

/// Summed (not averaged) binary log-loss. Throws on scores at 0 or 1.
double logloss(const ScoredSet& s);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// U statistic of sample `a` against `b` (pairs a > b plus half the ties).
/// Two-sided p: exact permutation distribution when both samples have at
/// most 20 values, tie-corrected normal approximation otherwise.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// Welch's unequal-variance t-test, two-sided.
TestResult t_test(std::span<const double> a, std::span<const double> b);

struct MetricsReport {
  double auc = 0.0;
  double logloss = 0.0;
  std::size_t n = 0;
  std::size_t positives = 0;
};

MetricsReport metrics(const ScoredSet& s);
std::string to_json(const MetricsReport& report);

}  // namespace hpmn
