#include "bplab/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bplab/kernels.hpp"

namespace bplab {

void ConditionalMatrix::validate() const {
  if (values.rows != static_cast<int>(row_labels.size()) ||
      values.cols != static_cast<int>(col_labels.size())) {
    throw DimensionMismatch("ConditionalMatrix '" + context + "': label/dimension mismatch");
  }
  for (double v : values.d) {
    if (!(v >= -kProbTol) || !std::isfinite(v)) {
      throw DimensionMismatch("ConditionalMatrix '" + context + "': invalid entry " +
                              std::to_string(v));
    }
  }
}

namespace {

// One-sided Jacobi: rotate column pairs of `work` (m x n) until all pairs are
// numerically orthogonal, accumulating rotations into v (n x n).
void jacobi_orthogonalize(Mat& work, Mat& v) {
  const int n = work.cols;
  const int m = work.rows;
  const double eps = 1e-15;
  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int i = 0; i < m; ++i) {
          const double xp = work.at(i, p), xq = work.at(i, q);
          app += xp * xp;
          aqq += xq * xq;
          apq += xp * xq;
        }
        if (std::fabs(apq) <= eps * std::sqrt(app * aqq) || apq == 0.0) continue;
        rotated = true;
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < m; ++i) {
          const double xp = work.at(i, p), xq = work.at(i, q);
          work.at(i, p) = c * xp - s * xq;
          work.at(i, q) = s * xp + c * xq;
        }
        for (int i = 0; i < n; ++i) {
          const double vp = v.at(i, p), vq = v.at(i, q);
          v.at(i, p) = c * vp - s * vq;
          v.at(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }
}

}  // namespace

SvdResult svd(const Mat& a) {
  // Work on the tall orientation; swap U/V back afterwards.
  const bool flipped = a.rows < a.cols;
  Mat work = flipped ? transpose(a) : a;
  const int m = work.rows, n = work.cols;
  Mat v = Mat::identity(n);
  jacobi_orthogonalize(work, v);

  std::vector<double> sigma(static_cast<size_t>(n));
  Mat u(m, n);
  for (int j = 0; j < n; ++j) {
    double norm2 = 0.0;
    for (int i = 0; i < m; ++i) norm2 += work.at(i, j) * work.at(i, j);
    const double s = std::sqrt(norm2);
    sigma[j] = s;
    if (s > 0.0) {
      for (int i = 0; i < m; ++i) u.at(i, j) = work.at(i, j) / s;
    }
  }
  // Sort singular values descending, permuting u and v columns alike.
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return sigma[x] > sigma[y]; });
  SvdResult r;
  r.sigma.resize(static_cast<size_t>(n));
  r.u = Mat(m, n);
  r.v = Mat(n, n);
  for (int j = 0; j < n; ++j) {
    r.sigma[j] = sigma[order[j]];
    for (int i = 0; i < m; ++i) r.u.at(i, j) = u.at(i, order[j]);
    for (int i = 0; i < n; ++i) r.v.at(i, j) = v.at(i, order[j]);
  }
  if (flipped) std::swap(r.u, r.v);
  return r;
}

Mat pinv(const Mat& a, double rel_threshold, RankDiagnostics* diag) {
  SvdResult s = svd(a);
  const double smax = s.sigma.empty() ? 0.0 : s.sigma.front();
  const double cut = rel_threshold * smax;
  int rank = 0;
  double smin_kept = 0.0;
  for (double sv : s.sigma) {
    if (sv > cut && sv > 0.0) {
      ++rank;
      smin_kept = sv;
    }
  }
  if (diag) {
    diag->singular_values = s.sigma;
    diag->effective_rank = rank;
    diag->rel_threshold = rel_threshold;
    diag->condition_number = (rank > 0) ? smax / smin_kept : 0.0;
  }
  // pinv = V * diag(1/sigma_kept) * U^T
  Mat vs(a.cols, rank);
  for (int j = 0; j < rank; ++j) {
    const double inv = 1.0 / s.sigma[j];
    for (int i = 0; i < a.cols; ++i) vs.at(i, j) = s.v.at(i, j) * inv;
  }
  Mat ut(rank, a.rows);
  for (int j = 0; j < rank; ++j) {
    for (int i = 0; i < a.rows; ++i) ut.at(j, i) = s.u.at(i, j);
  }
  if (rank == 0) return Mat(a.cols, a.rows);
  return matmul(vs, ut);
}

}  // namespace bplab
