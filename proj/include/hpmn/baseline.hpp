#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hpmn/model.hpp"

namespace hpmn {

/// Order-free reference model: the history is sum-pooled into one vector and
/// fed, with the target, context and user-side embeddings, to the same
/// prediction MLP HPMN uses.
struct SumPoolingModel {
  ModelConfig config;
  EmbeddingTables tables;
  PredictorMlp predictor;

  static SumPoolingModel create(const ModelConfig& config, std::uint64_t seed);

  SumPoolingModel zeros_like() const;
  std::vector<ParamView> parameters();
  std::vector<ConstParamView> parameters() const;

  Vector pool(const UserSequence& sequence) const;
  Scored score(const Sample& sample) const;
  double predict_probability(const Sample& sample) const { return score(sample).probability; }

  double batch_loss(std::span<const Sample> batch, const LossWeights& weights) const;
  double accumulate_gradients(std::span<const Sample> batch, const LossWeights& weights,
                              SumPoolingModel& grads) const;
};

}  // namespace hpmn
