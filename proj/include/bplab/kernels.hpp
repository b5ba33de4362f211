#pragma once

#include <cstddef>
#include <span>
#include <string>

// Data-parallel primitives behind the matrix and probability algebra.
// A scalar reference implementation always exists; an AVX2 variant is
// selected at runtime when the CPU supports it. Both are exposed so the
// test suite can check equivalence on the same inputs.

namespace bplab::kernels {

enum class Isa { kScalar, kAvx2 };

// Active implementation. Resolved once on first use; BPLAB_FORCE_SCALAR=1 in
// the environment pins the scalar path.
Isa active_isa();
const char* isa_name(Isa isa);
void force_isa(Isa isa);  // test hook

double dot(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> a);
void axpy(double alpha, std::span<const double> x, std::span<double> y);  // y += alpha*x
void scale(std::span<double> x, double alpha);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
// c[m x n] += a[m x k] * b[k x n], all row-major and dense.
void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n);

namespace detail {
double dot_scalar(const double* a, const double* b, size_t n);
double sum_scalar(const double* a, size_t n);
void axpy_scalar(double alpha, const double* x, double* y, size_t n);
void scale_scalar(double* x, double alpha, size_t n);
double max_abs_diff_scalar(const double* a, const double* b, size_t n);
void gemm_acc_scalar(const double* a, const double* b, double* c, int m, int k, int n);

#if defined(__x86_64__) || defined(_M_X64)
double dot_avx2(const double* a, const double* b, size_t n);
double sum_avx2(const double* a, size_t n);
void axpy_avx2(double alpha, const double* x, double* y, size_t n);
void scale_avx2(double* x, double alpha, size_t n);
double max_abs_diff_avx2(const double* a, const double* b, size_t n);
void gemm_acc_avx2(const double* a, const double* b, double* c, int m, int k, int n);
#endif
}  // namespace detail

}  // namespace bplab::kernels
