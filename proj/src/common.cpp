#include "bplab/common.hpp"

#include <algorithm>
#include <cstdio>

#include "bplab/kernels.hpp"

namespace bplab {

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) {
    throw DimensionMismatch("matmul: " + std::to_string(a.cols) + " vs " + std::to_string(b.rows));
  }
  Mat c(a.rows, b.cols);
  kernels::gemm_acc(a.d.data(), b.d.data(), c.d.data(), a.rows, a.cols, b.cols);
  return c;
}

Mat transpose(const Mat& m) {
  Mat t(m.cols, m.rows);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) t.at(c, r) = m.at(r, c);
  return t;
}

double max_abs_entry(const Mat& m) {
  double v = 0.0;
  for (double x : m.d) v = std::max(v, std::fabs(x));
  return v;
}

std::vector<double> validated_distribution(std::vector<double> probs, const std::string& what) {
  if (probs.empty()) throw DimensionMismatch(what + ": empty probability vector");
  double s = 0.0;
  for (double p : probs) {
    if (!(p >= -kProbTol)) throw DimensionMismatch(what + ": negative entry " + std::to_string(p));
    s += p;
  }
  if (std::fabs(s - 1.0) > kProbTol) {
    throw DimensionMismatch(what + ": entries sum to " + std::to_string(s) + ", expected 1");
  }
  for (double& p : probs) p = std::max(0.0, p) / s;
  return probs;
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("l1_distance: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s;
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  return 0.5 * l1_distance(a, b);
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t master, uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ull));
}

uint64_t Rng::next_u64() {
  // xorshift-star over a splitmix-initialized state; enough state transitions
  // for simulation draws and fully portable.
  state_ ^= state_ >> 12;
  state_ ^= state_ << 25;
  state_ ^= state_ >> 27;
  return state_ * 0x2545f4914f6cdd1dull;
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

int Rng::categorical(std::span<const double> probs) {
  const double u = uniform01();
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding slack: land on the last positive entry.
  for (size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace bplab
