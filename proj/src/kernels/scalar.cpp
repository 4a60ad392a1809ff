#include <cstring>

#include "rolegraph/kernels.hpp"

namespace rolegraph::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double sum_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

void relu_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_mul_scalar(const double* pre, const double* up, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] > 0.0 ? up[i] : 0.0;
}

void matmul_nn_scalar(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void matmul_tn_scalar(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = arow[i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

void matmul_nt_scalar(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot_scalar(a + i * k, b + j * k, k);
}

}  // namespace

namespace detail {
const OpsTable scalar_table = {
    dot_scalar,      axpy_scalar,      scale_scalar,     sum_scalar,      relu_scalar,
    relu_mask_mul_scalar, matmul_nn_scalar, matmul_tn_scalar, matmul_nt_scalar,
};
}  // namespace detail

}  // namespace rolegraph::kernels
