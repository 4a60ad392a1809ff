#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rolegraph/error.hpp"
#include "rolegraph/kernels.hpp"

namespace rolegraph {

// Dense row-major matrix of doubles. Biases are stored as 1 x n matrices so
// every trainable tensor flows through the same optimizer/checkpoint path.
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row_span(std::size_t r) { return {row(r), cols}; }
  std::span<const double> row_span(std::size_t r) const { return {row(r), cols}; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  Matrix like_zeros() const { return Matrix(rows, cols); }
  bool operator==(const Matrix&) const = default;
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols == b.rows, Errc::shape_mismatch, "matmul: inner dimensions differ");
  Matrix c(a.rows, b.cols);
  kernels::matmul_nn(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.cols);
  return c;
}

// a^T * b with a: k x m, b: k x n
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows == b.rows, Errc::shape_mismatch, "matmul_tn: leading dimensions differ");
  Matrix c(a.cols, b.cols);
  kernels::matmul_tn(a.data.data(), b.data.data(), c.data.data(), a.cols, a.rows, b.cols);
  return c;
}

// a * b^T with a: m x k, b: n x k
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols == b.cols, Errc::shape_mismatch, "matmul_nt: trailing dimensions differ");
  Matrix c(a.rows, b.rows);
  kernels::matmul_nt(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.rows);
  return c;
}

inline void add_inplace(Matrix& y, const Matrix& x) {
  require(y.same_shape(x), Errc::shape_mismatch, "add_inplace: shape mismatch");
  kernels::axpy(1.0, x.data.data(), y.data.data(), x.size());
}

inline void axpy_inplace(double alpha, const Matrix& x, Matrix& y) {
  require(y.same_shape(x), Errc::shape_mismatch, "axpy_inplace: shape mismatch");
  kernels::axpy(alpha, x.data.data(), y.data.data(), x.size());
}

inline Matrix relu(const Matrix& x) {
  Matrix out(x.rows, x.cols);
  kernels::relu(x.data.data(), out.data.data(), x.size());
  return out;
}

// up .* 1[pre > 0]
inline Matrix relu_backward(const Matrix& pre, const Matrix& up) {
  require(pre.same_shape(up), Errc::shape_mismatch, "relu_backward: shape mismatch");
  Matrix out(pre.rows, pre.cols);
  kernels::relu_mask_mul(pre.data.data(), up.data.data(), out.data.data(), pre.size());
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), Errc::shape_mismatch, "dot: length mismatch");
  return kernels::dot(a.data(), b.data(), a.size());
}

inline void tanh_inplace(std::span<double> x) {
  for (double& v : x) v = std::tanh(v);
}

inline std::vector<double> softmax(std::span<const double> logits) {
  double mx = -1e300;
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
  double mx = -1e300;
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double lz = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lz;
  return out;
}

inline bool all_finite(const Matrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace rolegraph
