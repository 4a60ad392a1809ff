#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "rolegraph/kernels.hpp"
#include "rolegraph/rng.hpp"

using namespace rolegraph;
namespace k = rolegraph::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

struct IsaGuard {
  k::Isa saved = k::active();
  ~IsaGuard() { k::force(saved); }
};

bool close(double a, double b, double tol = 1e-12) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= tol * scale;
}

}  // namespace

TEST_CASE("scalar kernels match simple references") {
  IsaGuard guard;
  k::force(k::Isa::scalar);
  Rng rng(11);
  const auto a = random_vec(rng, 37);
  const auto b = random_vec(rng, 37);

  long double expected = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    expected += static_cast<long double>(a[i]) * b[i];
  CHECK(close(k::dot(a.data(), b.data(), a.size()), static_cast<double>(expected), 1e-13));

  std::vector<double> y = b;
  k::axpy(0.5, a.data(), y.data(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(y[i] == doctest::Approx(b[i] + 0.5 * a[i]));

  // 2x2 hand case: [[1,2],[3,4]] * [[5,6],[7,8]] = [[19,22],[43,50]]
  const double m1[] = {1, 2, 3, 4};
  const double m2[] = {5, 6, 7, 8};
  double c[4];
  k::matmul_nn(m1, m2, c, 2, 2, 2);
  CHECK(c[0] == 19);
  CHECK(c[1] == 22);
  CHECK(c[2] == 43);
  CHECK(c[3] == 50);
}

TEST_CASE("avx2 lane matches the scalar reference lane") {
  if (!k::supported(k::Isa::avx2)) return;  // scalar-only machine
  IsaGuard guard;
  Rng rng(42);

  // Sizes exercise full vectors plus every remainder length.
  for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 17u, 64u, 301u}) {
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);

    k::force(k::Isa::scalar);
    const double dot_s = k::dot(a.data(), b.data(), n);
    const double sum_s = k::sum(a.data(), n);
    std::vector<double> axpy_s = b;
    k::axpy(1.25, a.data(), axpy_s.data(), n);
    std::vector<double> relu_s(n);
    k::relu(a.data(), relu_s.data(), n);
    std::vector<double> mask_s(n);
    k::relu_mask_mul(a.data(), b.data(), mask_s.data(), n);
    std::vector<double> scale_s = a;
    k::scale(-0.75, scale_s.data(), n);

    k::force(k::Isa::avx2);
    CHECK(close(k::dot(a.data(), b.data(), n), dot_s));
    CHECK(close(k::sum(a.data(), n), sum_s));
    std::vector<double> axpy_v = b;
    k::axpy(1.25, a.data(), axpy_v.data(), n);
    std::vector<double> relu_v(n);
    k::relu(a.data(), relu_v.data(), n);
    std::vector<double> mask_v(n);
    k::relu_mask_mul(a.data(), b.data(), mask_v.data(), n);
    std::vector<double> scale_v = a;
    k::scale(-0.75, scale_v.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(close(axpy_v[i], axpy_s[i]));
      CHECK(relu_v[i] == relu_s[i]);
      CHECK(mask_v[i] == mask_s[i]);
      CHECK(scale_v[i] == scale_s[i]);
    }
  }
}

TEST_CASE("avx2 matmul variants match scalar across shapes") {
  if (!k::supported(k::Isa::avx2)) return;
  IsaGuard guard;
  Rng rng(7);
  const std::size_t shapes[][3] = {{1, 1, 1},   {2, 3, 4},  {5, 7, 3},    {8, 8, 8},
                                   {3, 11, 13}, {16, 5, 9}, {1, 301, 64}};
  for (const auto& s : shapes) {
    const std::size_t m = s[0], kk = s[1], n = s[2];
    const auto a_nn = random_vec(rng, m * kk);
    const auto b_nn = random_vec(rng, kk * n);
    const auto a_tn = random_vec(rng, kk * m);
    const auto b_tn = random_vec(rng, kk * n);
    const auto a_nt = random_vec(rng, m * kk);
    const auto b_nt = random_vec(rng, n * kk);

    std::vector<double> c_s(m * n), c_v(m * n);
    k::force(k::Isa::scalar);
    k::matmul_nn(a_nn.data(), b_nn.data(), c_s.data(), m, kk, n);
    k::force(k::Isa::avx2);
    k::matmul_nn(a_nn.data(), b_nn.data(), c_v.data(), m, kk, n);
    for (std::size_t i = 0; i < m * n; ++i) CHECK(close(c_s[i], c_v[i]));

    k::force(k::Isa::scalar);
    k::matmul_tn(a_tn.data(), b_tn.data(), c_s.data(), m, kk, n);
    k::force(k::Isa::avx2);
    k::matmul_tn(a_tn.data(), b_tn.data(), c_v.data(), m, kk, n);
    for (std::size_t i = 0; i < m * n; ++i) CHECK(close(c_s[i], c_v[i]));

    k::force(k::Isa::scalar);
    k::matmul_nt(a_nt.data(), b_nt.data(), c_s.data(), m, kk, n);
    k::force(k::Isa::avx2);
    k::matmul_nt(a_nt.data(), b_nt.data(), c_v.data(), m, kk, n);
    for (std::size_t i = 0; i < m * n; ++i) CHECK(close(c_s[i], c_v[i]));
  }
}

TEST_CASE("lane management") {
  CHECK(k::supported(k::Isa::scalar));
  CHECK_NOTHROW(k::force(k::active()));
  CHECK(!k::isa_name(k::active()).empty());
}
