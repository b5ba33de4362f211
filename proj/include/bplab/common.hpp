#pragma once

#include <cstdint>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bplab {

// Absolute tolerance for stochasticity checks at construction time.
inline constexpr double kProbTol = 1e-12;
// Row-sum tolerance for assembled transition kernels.
inline constexpr double kKernelRowTol = 1e-10;

// ---------------------------------------------------------------------------
// Error types. Names follow the failure modes they signal.
// ---------------------------------------------------------------------------

struct ZeroMarginalSignal : std::runtime_error {
  explicit ZeroMarginalSignal(const std::string& what) : std::runtime_error(what) {}
};
struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};
struct EmptyPolicySet : std::runtime_error {
  explicit EmptyPolicySet(const std::string& what) : std::runtime_error(what) {}
};
struct UnindexedContext : std::runtime_error {
  explicit UnindexedContext(const std::string& what) : std::runtime_error(what) {}
};
struct StateSpaceTooLarge : std::runtime_error {
  explicit StateSpaceTooLarge(const std::string& what) : std::runtime_error(what) {}
};
struct UndefinedOnReachableObservation : std::runtime_error {
  explicit UndefinedOnReachableObservation(const std::string& what) : std::runtime_error(what) {}
};
struct EpochOutOfRange : std::runtime_error {
  explicit EpochOutOfRange(const std::string& what) : std::runtime_error(what) {}
};
struct UnsupportedAction : std::runtime_error {
  explicit UnsupportedAction(const std::string& what) : std::runtime_error(what) {}
};
struct InternalInconsistency : std::runtime_error {
  explicit InternalInconsistency(const std::string& what) : std::runtime_error(what) {}
};
struct MissingMatrix : std::runtime_error {
  explicit MissingMatrix(const std::string& what) : std::runtime_error(what) {}
};
struct RankConditionFailed : std::runtime_error {
  explicit RankConditionFailed(const std::string& what) : std::runtime_error(what) {}
};
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Dense row-major matrix, the storage under ConditionalMatrix and the kernels.
// ---------------------------------------------------------------------------

struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> d;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), d(static_cast<size_t>(r) * c, fill) {}

  double& at(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return d[static_cast<size_t>(r) * cols + c]; }
  std::span<double> row(int r) { return {d.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
  std::span<const double> row(int r) const {
    return {d.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
  }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
};

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& m);
double max_abs_entry(const Mat& m);

// ---------------------------------------------------------------------------
// Probability-vector helpers.
// ---------------------------------------------------------------------------

// Validates non-negativity and unit sum within kProbTol, then renormalizes the
// residual rounding error. Throws DimensionMismatch on empty input.
std::vector<double> validated_distribution(std::vector<double> probs, const std::string& what);

double l1_distance(std::span<const double> a, std::span<const double> b);
double total_variation(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Seeding. Per-stream seeds are derived with a splitmix64 mix so streams can
// be generated in any order (or in parallel) with identical results.
// ---------------------------------------------------------------------------

uint64_t splitmix64(uint64_t x);
uint64_t derive_seed(uint64_t master, uint64_t stream);

// Deterministic, platform-independent RNG. uniform01 avoids
// std::uniform_real_distribution, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x9e3779b97f4a7c15ull)) {}

  uint64_t next_u64();
  double uniform01();
  // CDF-inversion draw; probs need not be exactly normalized (trailing mass
  // lands on the last index).
  int categorical(std::span<const double> probs);

 private:
  uint64_t state_;
};

// FNV-1a over bytes, used for content hashes of canonical serializations.
uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(uint64_t h);

}  // namespace bplab
