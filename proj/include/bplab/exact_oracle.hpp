#pragma once

#include <map>
#include <vector>

#include "bplab/pomdp_lift.hpp"
#include "bplab/proximal_ope.hpp"

// Ground truth by exhaustive enumeration: exact trajectory distributions,
// exact strategy values, exact per-epoch reward distributions, and exact
// population-level conditional matrices under a behavioral strategy. This is
// the verification side of the artifact; the sample-mode estimator never
// consumes it.

namespace bplab {

struct TrajectoryDistribution {
  int horizon = 0;
  // full[t]: key = [x_0, u_0, ..., x_t, u_t] (state indices per level; no u_t
  // at level T+1). observable[t]: key = [y_t, u_t] ([y_t] at level T+1) —
  // the observation at t determines the whole observable past.
  std::vector<std::map<std::vector<int>, double>> full;
  std::vector<std::map<std::vector<int>, double>> observable;

  double mass(int t) const;  // per-t total, 1 within 1e-10
};

TrajectoryDistribution exact_traj_dist(const LiftedPomdp& pomdp, const ControlStrategy& strategy,
                                       size_t cap = 4000000);

// J(g), computed two independent ways (expectation of the summed rewards over
// full trajectories, and sum_t sum_r r * p(r_t)); throws InternalInconsistency
// when they disagree beyond 1e-10.
double exact_value(const LiftedPomdp& pomdp, const ControlStrategy& strategy);

// p^e(r^s_t) over the distinct sender reward values.
RewardDistribution exact_reward_dist(const LiftedPomdp& pomdp, const ControlStrategy& strategy,
                                     int t);
// Same, reusing an already-enumerated trajectory distribution.
RewardDistribution exact_reward_dist(const LiftedPomdp& pomdp,
                                     const TrajectoryDistribution& dist, int t);

// Exact conditional-matrix bundle under the behavioral strategy, indexed over
// the behavioral-reachable observation realizations in canonical order.
MatrixBundle population_matrices(const LiftedPomdp& pomdp, const ControlStrategy& behavioral);

}  // namespace bplab
