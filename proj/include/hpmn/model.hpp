#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hpmn/data.hpp"
#include "hpmn/embedding.hpp"
#include "hpmn/hpmn_core.hpp"
#include "hpmn/predictor.hpp"

namespace hpmn {

/// Named view of one trainable tensor. Vectors have cols == 1.
struct ParamView {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<double> values;
};

struct ConstParamView {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const double> values;
};

double squared_norm(std::span<const ConstParamView> params);

struct ModelConfig {
  VocabSizes vocab;
  FeatureLayout layout;
  std::size_t embed_dim = 16;
  std::size_t memory_dim = 32;
  std::size_t energy_hidden = 64;
  std::vector<std::size_t> mlp_hidden{200, 80};
  /// Upper bound of the update-gate time scales drawn at initialization; 0 starts every gate at 1/2.
  double gate_timescale = 0.0;
  UpdateSchedule schedule = UpdateSchedule::exponential(3);

  void validate() const;
  std::size_t event_width() const { return embed_dim * (2 + layout.side_slots); }

  bool operator==(const ModelConfig&) const = default;
};

struct LossWeights {
  double lambda = 0.0;
  double mu = 0.0;
};

/// Attention weights are empty for models without a memory read.
struct Scored {
  double probability = 0.5;
  Vector weights;
};

/// The full network: embeddings, hierarchical periodic memory, attentional
/// read and the prediction MLP.
struct HpmnModel {
  ModelConfig config;
  EmbeddingTables tables;
  CoreParams core;
  PredictorMlp predictor;

  static HpmnModel create(const ModelConfig& config, std::uint64_t seed);

  HpmnModel zeros_like() const;
  std::vector<ParamView> parameters();
  std::vector<ConstParamView> parameters() const;

  /// Hex digest of configuration and parameter bytes.
  std::string fingerprint() const;

  std::vector<Vector> embed_history(const UserSequence& sequence) const;
  MemoryPool encode(const UserSequence& sequence) const;

  /// Read the pool with the target as query, then predict.
  Scored score_pool(const MemoryPool& pool, const BehaviorEvent& target,
                    std::span<const std::int32_t> context,
                    std::span<const std::int32_t> user_side) const;

  /// Offline pipeline: run_sequence over the history, read, predict.
  Scored score(const Sample& sample) const;
  double predict_probability(const Sample& sample) const { return score(sample).probability; }

  /// Batch objective: summed cross entropy + lambda * mean covariance loss +
  /// mu/2 * squared norm of every trainable tensor.
  double batch_loss(std::span<const Sample> batch, const LossWeights& weights) const;

  /// Same objective; adds its gradient into `grads` (shaped like this model).
  double accumulate_gradients(std::span<const Sample> batch, const LossWeights& weights,
                              HpmnModel& grads) const;

  /// Adds a top layer with a larger period; see expand_model.
  void expand(std::int64_t new_period, std::uint64_t seed);

  bool operator==(const HpmnModel&) const = default;
};

void save_checkpoint(const std::filesystem::path& path, const HpmnModel& model);
HpmnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace hpmn
