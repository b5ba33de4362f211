#include "bplab/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace bplab::kernels {

namespace {

Isa resolve_isa() {
  if (const char* env = std::getenv("BPLAB_FORCE_SCALAR"); env && env[0] == '1') {
    return Isa::kScalar;
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return Isa::kAvx2;
  }
#endif
  return Isa::kScalar;
}

std::atomic<Isa> g_isa{resolve_isa()};

}  // namespace

Isa active_isa() { return g_isa.load(std::memory_order_relaxed); }

void force_isa(Isa isa) { g_isa.store(isa, std::memory_order_relaxed); }

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::kAvx2:
      return "avx2";
    case Isa::kScalar:
      return "scalar";
  }
  return "unknown";
}

double dot(std::span<const double> a, std::span<const double> b) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_isa() == Isa::kAvx2) return detail::dot_avx2(a.data(), b.data(), a.size());
#endif
  return detail::dot_scalar(a.data(), b.data(), a.size());
}

double sum(std::span<const double> a) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_isa() == Isa::kAvx2) return detail::sum_avx2(a.data(), a.size());
#endif
  return detail::sum_scalar(a.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_isa() == Isa::kAvx2) {
    detail::axpy_avx2(alpha, x.data(), y.data(), x.size());
    return;
  }
#endif
  detail::axpy_scalar(alpha, x.data(), y.data(), x.size());
}

void scale(std::span<double> x, double alpha) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_isa() == Isa::kAvx2) {
    detail::scale_avx2(x.data(), alpha, x.size());
    return;
  }
#endif
  detail::scale_scalar(x.data(), alpha, x.size());
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_isa() == Isa::kAvx2) return detail::max_abs_diff_avx2(a.data(), b.data(), a.size());
#endif
  return detail::max_abs_diff_scalar(a.data(), b.data(), a.size());
}

void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_isa() == Isa::kAvx2) {
    detail::gemm_acc_avx2(a, b, c, m, k, n);
    return;
  }
#endif
  detail::gemm_acc_scalar(a, b, c, m, k, n);
}

}  // namespace bplab::kernels
