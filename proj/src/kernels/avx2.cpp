#include "rolegraph/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define ROLEGRAPH_HAVE_AVX2_BUILD 1
#include <immintrin.h>

#include <cstring>
#else
#define ROLEGRAPH_HAVE_AVX2_BUILD 0
#endif

namespace rolegraph::kernels {

#if ROLEGRAPH_HAVE_AVX2_BUILD
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swap = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swap));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double a, double* x, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= a;
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

void relu_avx2(const double* x, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_mul_avx2(const double* pre, const double* up, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(mask, _mm256_loadu_pd(up + i)));
  }
  for (; i < n; ++i) out[i] = pre[i] > 0.0 ? up[i] : 0.0;
}

void matmul_nn_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = b + p * n;
      const __m256d av = _mm256_set1_pd(aip);
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void matmul_tn_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = arow[i];
      if (api == 0.0) continue;
      double* crow = c + i * n;
      const __m256d av = _mm256_set1_pd(api);
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

void matmul_nt_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot_avx2(a + i * k, b + j * k, k);
}

const OpsTable avx2_table_impl = {
    dot_avx2,      axpy_avx2,      scale_avx2,     sum_avx2,      relu_avx2,
    relu_mask_mul_avx2, matmul_nn_avx2, matmul_tn_avx2, matmul_nt_avx2,
};

}  // namespace
#endif  // ROLEGRAPH_HAVE_AVX2_BUILD

namespace detail {

const OpsTable* avx2_table() {
#if ROLEGRAPH_HAVE_AVX2_BUILD
  return &avx2_table_impl;
#else
  return nullptr;
#endif
}

bool cpu_has_avx2_fma() {
#if ROLEGRAPH_HAVE_AVX2_BUILD
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

}  // namespace detail

}  // namespace rolegraph::kernels
