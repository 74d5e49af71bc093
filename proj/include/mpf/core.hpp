#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpf {

// Dense 64-bit math, just enough for |h|=16 models. Largest matrix in the
// stack is head-width x 550, so everything is plain row-major storage.

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vector(std::initializer_list<double> xs) : data_(xs) {}

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline void check_same_length(const Vector& a, const Vector& b, const char* op) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(op) + ": length mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
}

/// y = W * x.
inline Vector linear_map(const Matrix& w, const Vector& x) {
  if (w.cols() != x.size()) {
    throw std::invalid_argument("linear_map: dimension mismatch (" +
                                std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                                " * " + std::to_string(x.size()) + ")");
  }
  Vector y(w.rows());
  const double* wd = w.data();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double acc = 0.0;
    const double* row = wd + r * w.cols();
    for (std::size_t c = 0; c < w.cols(); ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

/// Elementwise product.
inline Vector hadamard(const Vector& a, const Vector& b) {
  check_same_length(a, b, "hadamard");
  Vector y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] * b[i];
  return y;
}

inline Vector add(const Vector& a, const Vector& b) {
  check_same_length(a, b, "add");
  Vector y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

inline Vector scale(double c, const Vector& x) {
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = c * x[i];
  return y;
}

inline double dot(const Vector& a, const Vector& b) {
  check_same_length(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline Vector concat(const Vector& a, const Vector& b) {
  Vector y(a.size() + b.size());
  std::copy(a.begin(), a.end(), y.begin());
  std::copy(b.begin(), b.end(), y.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return y;
}

enum class Activation { Tanh, Relu, Cube };

/// tanh clamped to the open interval (-1, 1); std::tanh rounds to exactly
/// +-1.0 for |x| above ~19.06.
inline double bounded_tanh(double x) {
  double t = std::tanh(x);
  if (t >= 1.0) return std::nextafter(1.0, 0.0);
  if (t <= -1.0) return std::nextafter(-1.0, 0.0);
  return t;
}

/// relu'(0) is taken as 0 throughout (tape and plain paths agree).
inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline double cube(double x) { return x * x * x; }

inline Vector activate(const Vector& x, Activation kind) {
  Vector y(x.size());
  switch (kind) {
    case Activation::Tanh:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = bounded_tanh(x[i]);
      break;
    case Activation::Relu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = relu(x[i]);
      break;
    case Activation::Cube:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = cube(x[i]);
      break;
  }
  return y;
}

/// Numerically stable logistic link.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace mpf
