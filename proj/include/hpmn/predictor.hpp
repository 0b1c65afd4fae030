#pragma once

#include <span>
#include <vector>

#include "hpmn/numerics.hpp"
#include "hpmn/random.hpp"

namespace hpmn {

struct DenseLayer {
  Matrix w;
  Vector b;

  bool operator==(const DenseLayer&) const = default;
};

/// f(r, v, c, u): ReLU hidden layers followed by a sigmoid output unit.
struct PredictorMlp {
  std::vector<DenseLayer> layers;

  std::size_t input_width() const { return layers.empty() ? 0 : layers.front().w.cols(); }

  bool operator==(const PredictorMlp&) const = default;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Hidden widths default to {200, 80}; the output layer has width 1.
PredictorMlp init_predictor(std::size_t input_width, const std::vector<std::size_t>& hidden, Rng& rng);
PredictorMlp zeros_like(const PredictorMlp& mlp);

struct MlpCache {
  std::vector<Vector> inputs;
  double probability = 0.5;
  bool clamped = false;
};

/// Probability for an already-concatenated input, clamped to [1e-12, 1 - 1e-12].
double predict_input(const PredictorMlp& mlp, std::span<const double> input, MlpCache* cache = nullptr);

double predict(const PredictorMlp& mlp, std::span<const double> r, std::span<const double> v,
               std::span<const double> c, std::span<const double> u_side);

/// Backward from the cross-entropy of `label`: accumulates weight gradients
/// (scaled by `scale`) and returns dL/d input.
Vector predict_backward(const PredictorMlp& mlp, const MlpCache& cache, int label, double scale,
                        PredictorMlp& grads);

/// -[y log p + (1 - y) log(1 - p)]. Throws for p outside (0, 1).
double cross_entropy(int label, double probability);

/// Sum of cross entropies + lambda * mean covariance loss + mu/2 * squared parameter norm.
double total_loss(std::span<const double> cross_entropies, std::span<const Matrix> covariances,
                  double squared_param_norm, double lambda, double mu);

}  // namespace hpmn
