#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hpmn {

using Vector = std::vector<double>;

/// Raised when operand shapes do not line up. The message names both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  std::string shape() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_of(std::span<const double> v);

/// Returns W x + b.
Vector affine(const Matrix& w, std::span<const double> x, std::span<const double> b);

/// Backward of affine. Accumulates dW += dy xᵀ, db += dy and dx += Wᵀ dy.
/// An empty db or dx skips that gradient.
void affine_backward(const Matrix& w, std::span<const double> x, std::span<const double> dy,
                     Matrix& dw, std::span<double> db, std::span<double> dx);

enum class Activation { kSigmoid, kTanh, kRelu };

double sigmoid(double x);

Vector activate(Activation kind, std::span<const double> x);

/// Gradient through an activation, expressed in terms of its output y.
Vector activate_backward(Activation kind, std::span<const double> y, std::span<const double> dy);

/// Max-subtracted softmax. Throws on empty input.
Vector softmax(std::span<const double> e);

/// Given w = softmax(e) and dL/dw, returns dL/de.
Vector softmax_backward(std::span<const double> w, std::span<const double> dw);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
Vector finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                        std::span<const double> x, double h);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> v);
void add_into(std::span<double> dst, std::span<const double> src);
Vector concat(std::initializer_list<std::span<const double>> parts);
bool all_finite(std::span<const double> v);

}  // namespace hpmn
