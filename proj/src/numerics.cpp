#include "hpmn/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hpmn {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix data of length " + std::to_string(data_.size()) +
                         " does not fit shape " + shape());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape() const {
  std::ostringstream os;
  os << rows_ << "x" << cols_;
  return os.str();
}

std::string shape_of(std::span<const double> v) { return "[" + std::to_string(v.size()) + "]"; }

Vector affine(const Matrix& w, std::span<const double> x, std::span<const double> b) {
  if (w.cols() != x.size() || w.rows() != b.size()) {
    throw DimensionError("affine: W " + w.shape() + " incompatible with x " + shape_of(x) +
                         " and b " + shape_of(b));
  }
  Vector y(b.begin(), b.end());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
  return y;
}

void affine_backward(const Matrix& w, std::span<const double> x, std::span<const double> dy,
                     Matrix& dw, std::span<double> db, std::span<double> dx) {
  if (dy.size() != w.rows() || x.size() != w.cols() || dw.rows() != w.rows() ||
      dw.cols() != w.cols() || (!db.empty() && db.size() != w.rows()) || (!dx.empty() && dx.size() != w.cols())) {
    throw DimensionError("affine_backward: W " + w.shape() + ", x " + shape_of(x) + ", dy " +
                         shape_of(dy) + ", dW " + dw.shape());
  }
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double g = dy[r];
    if (!db.empty()) db[r] += g;
    if (g == 0.0) continue;
    auto drow = dw.row(r);
    for (std::size_t c = 0; c < x.size(); ++c) drow[c] += g * x[c];
    if (!dx.empty()) {
      const auto row = w.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) dx[c] += g * row[c];
    }
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector activate(Activation kind, std::span<const double> x) {
  Vector y(x.size());
  switch (kind) {
    case Activation::kSigmoid:
      std::transform(x.begin(), x.end(), y.begin(), sigmoid);
      break;
    case Activation::kTanh:
      std::transform(x.begin(), x.end(), y.begin(), [](double v) { return std::tanh(v); });
      break;
    case Activation::kRelu:
      std::transform(x.begin(), x.end(), y.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
      break;
  }
  return y;
}

Vector activate_backward(Activation kind, std::span<const double> y, std::span<const double> dy) {
  if (y.size() != dy.size()) {
    throw DimensionError("activate_backward: y " + shape_of(y) + " vs dy " + shape_of(dy));
  }
  Vector dx(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    switch (kind) {
      case Activation::kSigmoid: dx[i] = dy[i] * y[i] * (1.0 - y[i]); break;
      case Activation::kTanh: dx[i] = dy[i] * (1.0 - y[i] * y[i]); break;
      case Activation::kRelu: dx[i] = y[i] > 0.0 ? dy[i] : 0.0; break;
    }
  }
  return dx;
}

Vector softmax(std::span<const double> e) {
  if (e.empty()) throw DimensionError("softmax: empty input");
  const double top = *std::max_element(e.begin(), e.end());
  Vector w(e.size());
  double total = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    w[i] = std::exp(e[i] - top);
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

Vector softmax_backward(std::span<const double> w, std::span<const double> dw) {
  if (w.size() != dw.size()) {
    throw DimensionError("softmax_backward: w " + shape_of(w) + " vs dw " + shape_of(dw));
  }
  const double inner = dot(w, dw);
  Vector de(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) de[i] = w[i] * (dw[i] - inner);
  return de;
}

Vector finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                        std::span<const double> x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  Vector probe(x.begin(), x.end());
  Vector grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_grad: non-finite function value at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: " + shape_of(a) + " vs " + shape_of(b));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(std::span<const double> v) { return dot(v, v); }

void add_into(std::span<double> dst, std::span<const double> src) {
  if (dst.size() != src.size()) {
    throw DimensionError("add_into: " + shape_of(dst) + " vs " + shape_of(src));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Vector concat(std::initializer_list<std::span<const double>> parts) {
  std::size_t n = 0;
  for (const auto& p : parts) n += p.size();
  Vector out;
  out.reserve(n);
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace hpmn
