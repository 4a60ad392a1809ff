#pragma once

#include <cstddef>
#include <string_view>

// Scalar reference kernels plus an AVX2 variant selected at runtime. All dense
// arithmetic inner loops in the project go through this table; the two
// implementations are equivalence-tested against each other.
namespace rolegraph::kernels {

enum class Isa { scalar, avx2 };

struct OpsTable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);          // y += a*x
  void (*scale)(double, double*, std::size_t);                        // x *= a
  double (*sum)(const double*, std::size_t);
  void (*relu)(const double*, double*, std::size_t);                  // out = max(x, 0)
  void (*relu_mask_mul)(const double*, const double*, double*, std::size_t);  // out = up .* (pre > 0)
  // Row-major dense products. C is overwritten.
  void (*matmul_nn)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);  // C[mxn] = A[mxk] B[kxn]
  void (*matmul_tn)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);  // C[mxn] = A^T B, A[kxm] B[kxn]
  void (*matmul_nt)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);  // C[mxn] = A B^T, A[mxk] B[nxk]
};

// Active table; resolved from CPU features on first use.
const OpsTable& ops();

Isa active();
bool supported(Isa isa);
// Force a lane (tests, benchmarking). Throws rolegraph::Error(config_error)
// if the requested lane is not supported on this machine.
void force(Isa isa);
std::string_view isa_name(Isa isa);

inline double dot(const double* a, const double* b, std::size_t n) { return ops().dot(a, b, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { ops().axpy(a, x, y, n); }
inline void scale(double a, double* x, std::size_t n) { ops().scale(a, x, n); }
inline double sum(const double* x, std::size_t n) { return ops().sum(x, n); }
inline void relu(const double* x, double* out, std::size_t n) { ops().relu(x, out, n); }
inline void relu_mask_mul(const double* pre, const double* up, double* out, std::size_t n) {
  ops().relu_mask_mul(pre, up, out, n);
}
inline void matmul_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  ops().matmul_nn(a, b, c, m, k, n);
}
inline void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  ops().matmul_tn(a, b, c, m, k, n);
}
inline void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  ops().matmul_nt(a, b, c, m, k, n);
}

namespace detail {
extern const OpsTable scalar_table;
const OpsTable* avx2_table();  // nullptr when not compiled in
bool cpu_has_avx2_fma();
}  // namespace detail

}  // namespace rolegraph::kernels
