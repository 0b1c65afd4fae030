#include "hpmn/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hpmn/hpmn_core.hpp"

namespace hpmn {

PredictorMlp init_predictor(std::size_t input_width, const std::vector<std::size_t>& hidden, Rng& rng) {
  if (input_width == 0) throw std::invalid_argument("predictor input width must be >= 1");
  PredictorMlp mlp;
  std::size_t in = input_width;
  std::vector<std::size_t> widths = hidden;
  widths.push_back(1);
  for (std::size_t out : widths) {
    DenseLayer layer{Matrix(out, in), Vector(out, 0.0)};
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : layer.w.values()) w = dist(rng);
    mlp.layers.push_back(std::move(layer));
    in = out;
  }
  return mlp;
}

PredictorMlp zeros_like(const PredictorMlp& mlp) {
  PredictorMlp z = mlp;
  for (auto& layer : z.layers) {
    for (auto& w : layer.w.values()) w = 0.0;
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
  }
  return z;
}

double predict_input(const PredictorMlp& mlp, std::span<const double> input, MlpCache* cache) {
  if (input.size() != mlp.input_width()) {
    throw DimensionError("predict: MLP expects input [" + std::to_string(mlp.input_width()) +
                         "], got " + shape_of(input));
  }
  Vector x(input.begin(), input.end());
  if (cache) cache->inputs.clear();
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    Vector y = affine(mlp.layers[l].w, x, mlp.layers[l].b);
    if (l + 1 < mlp.layers.size()) y = activate(Activation::kRelu, y);
    if (cache) cache->inputs.push_back(std::move(x));
    x = std::move(y);
  }
  const double raw = sigmoid(x[0]);
  const double p = std::clamp(raw, kProbabilityFloor, 1.0 - kProbabilityFloor);
  if (cache) {
    cache->probability = p;
    cache->clamped = p != raw;
  }
  return p;
}

double predict(const PredictorMlp& mlp, std::span<const double> r, std::span<const double> v,
               std::span<const double> c, std::span<const double> u_side) {
  return predict_input(mlp, concat({r, v, c, u_side}));
}

Vector predict_backward(const PredictorMlp& mlp, const MlpCache& cache, int label, double scale,
                        PredictorMlp& grads) {
  // d CE / d logit = p - y for the unclamped sigmoid; zero once clamped.
  Vector dy{cache.clamped ? 0.0 : scale * (cache.probability - static_cast<double>(label))};
  for (std::size_t l = mlp.layers.size(); l-- > 0;) {
    const auto& layer = mlp.layers[l];
    const auto& x = cache.inputs[l];
    Vector dx(layer.w.cols(), 0.0);
    affine_backward(layer.w, x, dy, grads.layers[l].w, grads.layers[l].b, dx);
    // x is the ReLU output of the previous layer (or the raw input for l = 0).
    dy = l > 0 ? activate_backward(Activation::kRelu, x, dx) : std::move(dx);
  }
  return dy;
}

double cross_entropy(int label, double probability) {
  if (!(probability > 0.0 && probability < 1.0)) {
    throw std::domain_error("cross_entropy: probability " + std::to_string(probability) +
                            " outside (0, 1)");
  }
  return label == 1 ? -std::log(probability) : -std::log1p(-probability);
}

double total_loss(std::span<const double> cross_entropies, std::span<const Matrix> covariances,
                  double squared_param_norm, double lambda, double mu) {
  if (lambda < 0.0 || mu < 0.0) throw std::invalid_argument("total_loss: negative weight");
  double ce = 0.0;
  for (double v : cross_entropies) ce += v;
  double cov = 0.0;
  for (const auto& c : covariances) cov += covariance_loss(c);
  if (!covariances.empty()) cov /= static_cast<double>(covariances.size());
  return ce + lambda * cov + 0.5 * mu * squared_param_norm;
}

}  // namespace hpmn
