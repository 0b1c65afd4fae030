#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "hpmn/data.hpp"
#include "hpmn/eval.hpp"
#include "hpmn/model.hpp"
#include "hpmn/random.hpp"

namespace hpmn {

struct TrainConfig {
  double learning_rate = 1e-3;
  double lambda = 1e-4;
  double mu = 1e-5;
  std::size_t batch_size = 128;
  std::size_t epochs = 5;
  std::uint64_t seed = 0;
  UpdateSchedule schedule = UpdateSchedule::exponential(3);
  std::size_t memory_dim = 32;
  std::size_t embed_dim = 16;

  void validate() const;
  LossWeights loss_weights() const { return {lambda, mu}; }
};

/// Raised when a batch produces a non-finite loss.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::size_t epoch, std::size_t batch)
      : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch)),
        batch_(batch) {}
  std::size_t batch() const { return batch_; }

 private:
  std::size_t batch_;
};

class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void step(const std::vector<ParamView>& params, const std::vector<ConstParamView>& grads,
            double learning_rate);

 private:
  double beta1_, beta2_, epsilon_;
  std::int64_t t_ = 0;
  std::vector<Vector> m_, v_;
};

template <class M>
concept TrainableModel = requires(M& m, const M& cm, std::span<const Sample> batch, const Sample& s,
                                  const LossWeights& w) {
  { cm.zeros_like() } -> std::same_as<M>;
  { m.parameters() } -> std::same_as<std::vector<ParamView>>;
  { cm.parameters() } -> std::same_as<std::vector<ConstParamView>>;
  { cm.batch_loss(batch, w) } -> std::convertible_to<double>;
  { cm.accumulate_gradients(batch, w, m) } -> std::convertible_to<double>;
  { cm.predict_probability(s) } -> std::convertible_to<double>;
};

struct BatchRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double train_loss = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::vector<BatchRecord> batches;
  double mean_batch_loss = 0.0;
};

/// Mini-batch Adam on the batch objective. Shuffling is a pure function of
/// (seed, epoch), so reruns reproduce parameters exactly.
template <TrainableModel M>
class Trainer {
 public:
  Trainer(M model, TrainConfig config) : model_(std::move(model)), config_(std::move(config)) {
    config_.validate();
  }

  EpochLog train_epoch(std::span<const Sample> dataset) {
    if (dataset.empty()) throw std::invalid_argument("train_epoch: empty dataset");
    const std::size_t epoch = epochs_done_ + 1;
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    auto rng = stream_rng(config_.seed, 1000 + epoch);
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog log;
    log.epoch = epoch;
    std::vector<Sample> batch;
    double total = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += config_.batch_size, ++b) {
      const std::size_t end = std::min(order.size(), start + config_.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(dataset[order[k]]);
      M grads = model_.zeros_like();
      double loss = 0.0;
      try {
        loss = model_.accumulate_gradients(batch, config_.loss_weights(), grads);
      } catch (const std::domain_error&) {
        throw NonFiniteLoss(epoch, b);
      }
      if (!std::isfinite(loss)) throw NonFiniteLoss(epoch, b);
      const auto grad_views = std::as_const(grads).parameters();
      adam_.step(model_.parameters(), grad_views, config_.learning_rate);
      const double per_sample = loss / static_cast<double>(batch.size());
      log.batches.push_back({epoch, b, per_sample});
      total += per_sample;
    }
    log.mean_batch_loss = total / static_cast<double>(log.batches.size());
    ++epochs_done_;
    return log;
  }

  const M& model() const { return model_; }
  M& model() { return model_; }
  const TrainConfig& config() const { return config_; }
  std::size_t epochs_done() const { return epochs_done_; }

 private:
  M model_;
  TrainConfig config_;
  Adam adam_;
  std::size_t epochs_done_ = 0;
};

template <TrainableModel M>
ScoredSet score_all(const M& model, std::span<const Sample> samples) {
  ScoredSet out;
  for (const auto& s : samples) out.add(s.label, model.predict_probability(s));
  return out;
}

/// Mean per-sample cross entropy.
inline double mean_logloss(const ScoredSet& s) {
  return s.size() ? logloss(s) / static_cast<double>(s.size()) : 0.0;
}

/// One row of the learning-curve CSV. Test columns are NaN for per-batch
/// rows; epoch summary rows carry batch = -1.
struct CurveRow {
  std::size_t epoch = 0;
  long batch = 0;
  double train_loss = 0.0;
  double test_logloss = std::numeric_limits<double>::quiet_NaN();
  double test_auc = std::numeric_limits<double>::quiet_NaN();
};

void write_learning_curve(const std::filesystem::path& path, std::span<const CurveRow> rows);

template <class M>
struct FitResult {
  M best_model;
  std::size_t best_epoch = 0;
  double best_auc = -1.0;
  double best_logloss = 0.0;
  std::vector<CurveRow> curve;
  /// Mean cross entropy over the training set measured after each epoch.
  std::vector<double> train_loss_after_epoch;
};

struct FitOptions {
  bool measure_train_loss = false;
};

/// Trains for config.epochs and keeps the epoch with the best test AUC.
template <TrainableModel M>
FitResult<M> fit(M initial, std::span<const Sample> train, std::span<const Sample> test,
                 const TrainConfig& config, const FitOptions& options = {}) {
  Trainer<M> trainer(std::move(initial), config);
  FitResult<M> result{trainer.model(), 0, -1.0, 0.0, {}, {}};
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const EpochLog log = trainer.train_epoch(train);
    for (const auto& b : log.batches) {
      result.curve.push_back({b.epoch, static_cast<long>(b.batch), b.train_loss});
    }
    CurveRow summary{log.epoch, -1, log.mean_batch_loss};
    if (options.measure_train_loss) {
      const double train_loss = mean_logloss(score_all(trainer.model(), train));
      result.train_loss_after_epoch.push_back(train_loss);
      summary.train_loss = train_loss;
    }
    if (!test.empty()) {
      const ScoredSet scored = score_all(trainer.model(), test);
      summary.test_logloss = mean_logloss(scored);
      summary.test_auc = auc(scored);
      if (summary.test_auc > result.best_auc) {
        result.best_auc = summary.test_auc;
        result.best_logloss = logloss(scored);
        result.best_epoch = log.epoch;
        result.best_model = trainer.model();
      }
      spdlog::info("epoch {}: train {:.5f} test logloss {:.5f} auc {:.5f}", log.epoch,
                   summary.train_loss, summary.test_logloss, summary.test_auc);
    } else {
      result.best_model = trainer.model();
      result.best_epoch = log.epoch;
      spdlog::info("epoch {}: train {:.5f}", log.epoch, summary.train_loss);
    }
    result.curve.push_back(summary);
  }
  return result;
}

struct TensorCheck {
  std::string name;
  std::size_t size = 0;
  double max_relative_error = 0.0;
  double max_abs_analytic = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double tolerance = 1e-4;
  bool passed = true;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  /// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Applied to the analytic gradient before comparison (mutation testing).
  std::function<void(const std::vector<ParamView>&)> tamper;
};

/// Compares analytic gradients of the batch objective against central
/// differences, tensor by tensor.
template <TrainableModel M>
GradCheckReport grad_check_model(const M& model, std::span<const Sample> batch, const LossWeights& weights,
                                 const GradCheckOptions& options = {}) {
  M grads = model.zeros_like();
  model.accumulate_gradients(batch, weights, grads);
  if (options.tamper) options.tamper(grads.parameters());
  const auto analytic = std::as_const(grads).parameters();

  M probe = model;
  auto views = probe.parameters();
  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (std::size_t t = 0; t < views.size(); ++t) {
    TensorCheck check{views[t].name, views[t].values.size()};
    for (std::size_t k = 0; k < views[t].values.size(); ++k) {
      double& x = views[t].values[k];
      const double orig = x;
      x = orig + options.step;
      const double up = probe.batch_loss(batch, weights);
      x = orig - options.step;
      const double down = probe.batch_loss(batch, weights);
      x = orig;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[t].values[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      check.max_relative_error = std::max(check.max_relative_error, std::abs(a - numeric) / denom);
      check.max_abs_analytic = std::max(check.max_abs_analytic, std::abs(a));
    }
    check.passed = check.max_relative_error < options.tolerance;
    report.passed = report.passed && check.passed;
    report.tensors.push_back(std::move(check));
  }
  return report;
}

std::string format_report(const GradCheckReport& report);

}  // namespace hpmn
