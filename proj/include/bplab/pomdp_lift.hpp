#pragma once

#include <map>
#include <string>
#include <vector>

#include "bplab/spp_sim.hpp"

// The equivalent POMDP: time-indexed state and observation spaces restricted
// to the forward-reachable realizations, the composed transition kernel, the
// reward map, the meta-policy <-> control-strategy correspondence, and the
// executable checks behind the Markov and time-disjointness claims.

namespace bplab {

// Time-tagged state. t=0: (b_{-1}=uniform token, s_0, z_0) with b_prev=-1.
// t=1..T: (delta_t, s_t, b_{t-1}, z_t). t=T+1: (delta_{T+1}, b_T) with s=-1,
// z=-1.
struct PomdpState {
  int t = 0;
  InfoVector delta;
  int s = -1;
  int b_prev = -1;
  int z = -1;

  std::vector<int> key() const;
};

// Observation projection of the state: (s_0) at t=0, (delta, s) mid,
// (delta) final. The pre-initial token y_{-1} is the implicit uniform prior.
struct ObsKey {
  int t = 0;
  InfoVector delta;
  int s = -1;

  std::vector<int> key() const;
};

struct SparseEntry {
  int target = 0;  // index into the t+1 state enumeration
  double prob = 0.0;
};
using SparseRow = std::vector<SparseEntry>;

struct LiftedPomdp {
  EnvironmentSpec env;
  int horizon = 0;      // T
  int num_actions = 0;  // |P|

  // Per t = 0..T+1, canonically ordered (sorted encodings).
  std::vector<std::vector<PomdpState>> states;
  std::vector<std::vector<ObsKey>> observations;
  std::vector<std::map<std::vector<int>, int>> state_index;
  std::vector<std::map<std::vector<int>, int>> obs_index;
  std::vector<std::vector<int>> obs_of_state;  // [t][state] -> obs idx

  // trans[t][x][u] for t = 0..T.
  std::vector<std::vector<std::vector<SparseRow>>> trans;

  // Reward carried into each state: reward_entering[t][x] = rho^s(s_{t-1},
  // a_{t-1}) read from the delta tail, for t = 1..T+1. r_{T+1} is identically
  // zero (no epoch beyond T).
  std::vector<std::vector<double>> reward_entering;

  size_t total_states() const;
};

// Forward-closure construction. Aborts with StateSpaceTooLarge when the
// reachable state count exceeds `cap`.
LiftedPomdp build_pomdp(const EnvironmentSpec& env, size_t cap = 1000000);

// Observation-based strategy: per t = 0..T, rows over the action set keyed by
// the observation encoding. Querying an observation outside t's space throws
// UndefinedOnReachableObservation.
struct ControlStrategy {
  int horizon = 0;
  int num_actions = 0;
  std::vector<std::map<std::vector<int>, std::vector<double>>> rows;
  std::string descriptor;

  const std::vector<double>& row(int t, const std::vector<int>& obs_enc) const;
  double action_prob(int t, const std::vector<int>& obs_enc, int u) const;
};

// g_t(y_t) := meta(delta, s); inverse of lower_meta_policy on reachable
// observations.
ControlStrategy lift_meta_policy(const MetaPolicy& meta, const LiftedPomdp& pomdp);

// Rebuilds a meta-policy (exhaustive table) from the strategy's rows.
MetaPolicy lower_meta_policy(const ControlStrategy& strategy);

struct MarkovReport {
  double max_tv_gap = 0.0;
  std::string worst_history;
  size_t histories_checked = 0;
};

// Exhaustively enumerates the generative process at full-history granularity,
// computes p(x_{t+1} | x_{0:t}, u_{0:t}) for every positive-probability
// history and action sequence, and compares against the assembled kernel row
// p(x_{t+1} | x_t, u_t). A zero gap is the executable form of the Markov
// property of the lifted state.
MarkovReport validate_markov(const EnvironmentSpec& env, const LiftedPomdp& pomdp,
                             size_t history_cap = 4000000);

struct DisjointnessReport {
  bool ok = true;
  std::string offending;
};

// True iff state encodings are pairwise disjoint across time levels, every
// transition targets the t+1 level only, and rows are stochastic within
// 1e-10.
DisjointnessReport validate_time_disjointness(const LiftedPomdp& pomdp);

// Diagnostic text dump: per-t space sizes and the kernel triples. For
// inspection only; not a stability-guaranteed format.
std::string dump_diagnostic(const LiftedPomdp& pomdp, size_t max_triples = 1000);

}  // namespace bplab
