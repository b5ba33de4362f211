#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <vector>

#include "bplab/common.hpp"
#include "bplab/kernels.hpp"

using namespace bplab;

namespace {

std::vector<double> random_vec(Rng& rng, size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform01();
  return v;
}

struct IsaGuard {
  kernels::Isa saved;
  IsaGuard() : saved(kernels::active_isa()) {}
  ~IsaGuard() { kernels::force_isa(saved); }
};

}  // namespace

TEST_CASE("scalar and simd variants agree on random inputs") {
  IsaGuard guard;
  if (guard.saved != kernels::Isa::kAvx2) {
    MESSAGE("AVX2 unavailable at runtime; dispatch equivalence trivially scalar");
    return;
  }
  Rng rng(20240811);
  for (size_t n : {0u, 1u, 3u, 4u, 7u, 64u, 257u, 4096u}) {
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);

    kernels::force_isa(kernels::Isa::kScalar);
    const double dot_s = kernels::dot(a, b);
    const double sum_s = kernels::sum(a);
    const double mad_s = kernels::max_abs_diff(a, b);
    auto y_s = b;
    kernels::axpy(0.37, a, y_s);
    auto x_s = a;
    kernels::scale(x_s, -1.75);

    kernels::force_isa(kernels::Isa::kAvx2);
    const double dot_v = kernels::dot(a, b);
    const double sum_v = kernels::sum(a);
    const double mad_v = kernels::max_abs_diff(a, b);
    auto y_v = b;
    kernels::axpy(0.37, a, y_v);
    auto x_v = a;
    kernels::scale(x_v, -1.75);

    CHECK(dot_s == doctest::Approx(dot_v).epsilon(1e-13));
    CHECK(sum_s == doctest::Approx(sum_v).epsilon(1e-13));
    CHECK(mad_s == doctest::Approx(mad_v).epsilon(1e-13));
    for (size_t i = 0; i < n; ++i) {
      CHECK(y_s[i] == doctest::Approx(y_v[i]).epsilon(1e-13));
      CHECK(x_v[i] == x_s[i]);
    }
  }
}

TEST_CASE("gemm variants match the naive triple loop") {
  IsaGuard guard;
  Rng rng(7);
  for (auto [m, k, n] : {std::tuple{1, 1, 1}, {3, 4, 5}, {8, 8, 8}, {13, 7, 9}, {2, 31, 6}}) {
    const auto a = random_vec(rng, static_cast<size_t>(m) * k);
    const auto b = random_vec(rng, static_cast<size_t>(k) * n);
    std::vector<double> naive(static_cast<size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        for (int p = 0; p < k; ++p)
          naive[static_cast<size_t>(i) * n + j] +=
              a[static_cast<size_t>(i) * k + p] * b[static_cast<size_t>(p) * n + j];

    for (auto isa : {kernels::Isa::kScalar, kernels::Isa::kAvx2}) {
      if (isa == kernels::Isa::kAvx2 && guard.saved != kernels::Isa::kAvx2) continue;
      kernels::force_isa(isa);
      std::vector<double> c(static_cast<size_t>(m) * n, 0.0);
      kernels::gemm_acc(a.data(), b.data(), c.data(), m, k, n);
      for (size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(naive[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("matmul respects dimensions and values") {
  Mat a(2, 3);
  a.d = {1, 2, 3, 4, 5, 6};
  Mat b(3, 2);
  b.d = {7, 8, 9, 10, 11, 12};
  const Mat c = matmul(a, b);
  CHECK(c.at(0, 0) == 58);
  CHECK(c.at(0, 1) == 64);
  CHECK(c.at(1, 0) == 139);
  CHECK(c.at(1, 1) == 154);
  CHECK_THROWS_AS(matmul(a, a), DimensionMismatch);
}

TEST_CASE("rng categorical is deterministic and in-range") {
  Rng a(42), b(42);
  std::vector<double> probs{0.2, 0.3, 0.5};
  for (int i = 0; i < 1000; ++i) {
    const int xa = a.categorical(probs);
    const int xb = b.categorical(probs);
    CHECK(xa == xb);
    CHECK(xa >= 0);
    CHECK(xa < 3);
  }
  // Zero-probability entries are never drawn.
  Rng c(99);
  std::vector<double> point{0.0, 1.0, 0.0};
  for (int i = 0; i < 100; ++i) CHECK(c.categorical(point) == 1);
}
