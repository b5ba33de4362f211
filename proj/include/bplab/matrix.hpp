#pragma once

#include <string>
#include <vector>

#include "bplab/common.hpp"

// Labeled conditional-probability matrices and the thresholded least-squares
// inverse that realizes the invertibility assumption on them, with rank
// diagnostics instead of hard failures.

namespace bplab {

// Convention: P(row-variable | column-variable, fixed context values).
// Every column of a well-formed conditional matrix sums to 1.
struct ConditionalMatrix {
  Mat values;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::string context;  // e.g. "t=2 u=1" — the fixed conditioning values

  void validate() const;  // label/dimension agreement, entries >= -kProbTol (clamped)
};

struct SvdResult {
  Mat u;                      // m x r
  std::vector<double> sigma;  // r descending
  Mat v;                      // n x r
};

// One-sided Jacobi SVD; intended for the small dense matrices this project
// produces. Exact enough for left-inverse checks at 1e-10.
SvdResult svd(const Mat& a);

struct RankDiagnostics {
  std::vector<double> singular_values;  // descending
  int effective_rank = 0;               // at rel_threshold * sigma_max
  double condition_number = 0.0;        // sigma_max / smallest kept sigma
  double rel_threshold = 0.0;
  bool pass = false;  // set by callers that know the required rank
  std::string note;
};

// Minimum-norm least-squares inverse via SVD. Singular values below
// rel_threshold * sigma_max are treated as zero; never emits NaN/Inf.
Mat pinv(const Mat& a, double rel_threshold = 1e-9, RankDiagnostics* diag = nullptr);

}  // namespace bplab
