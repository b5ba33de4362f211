#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bplab/bp_core.hpp"
#include "bplab/common.hpp"

// The sequential persuasion process: confounder, receiver belief-kernel
// dynamics, information vectors, meta-policies, episode simulation and
// dataset generation.

namespace bplab {

struct ConfounderSpec {
  std::vector<std::string> values;
  std::vector<double> initial_dist;  // eta

  int size() const { return static_cast<int>(values.size()); }

  static ConfounderSpec make(std::vector<std::string> values, std::vector<double> initial_dist);
};

// The finite belief space. Points are pairwise distinct (L1 > 1e-9) and the
// uniform distribution is always a member.
struct BeliefGrid {
  std::vector<BeliefVector> points;
  int uniform_index = -1;

  int size() const { return static_cast<int>(points.size()); }
  // Nearest point in L1; ties resolved by lowest grid index.
  int nearest_l1(std::span<const double> belief) const;

  static BeliefGrid make(std::vector<BeliefVector> points);
};

// Context of one belief update. `initial` selects the first-round variant,
// where no (b_prev, reward, action) exist yet and the working prior is
// uniform.
struct KernelContext {
  bool initial = false;
  int b_prev = -1;   // grid index
  int r_prev = -1;   // index into receiver_values
  int a_prev = -1;   // action index
  int q = -1;        // signal index
  int z = -1;        // confounder index
  int u = -1;        // committed policy index
};

// Conditional table p(b_i | b_{i-1}, rho^r_{i-1}, a_{i-1}, q_i, z_i, pi_i)
// plus the initial-round variant p(b_0 | q_0, z_0, pi_0). Rows are
// distributions over the belief grid.
class BeliefKernel {
 public:
  BeliefKernel() = default;
  BeliefKernel(int nb, int nr, int na, int nq, int nz, int nu);

  std::span<const double> row(const KernelContext& ctx) const;  // throws UnindexedContext
  void set_row(const KernelContext& ctx, std::vector<double> probs);
  bool fully_defined() const;

  int num_grid_points() const { return nb_; }

  // Built-in family: Bayes update of the working prior (previous belief;
  // uniform on the initial round) with the likelihood pi(q|s) raised to
  // 1 + kappa(z), projected to the nearest grid point in L1 (lowest grid
  // index on ties). kappa = 0 is the neutral Bayesian receiver, kappa < -1
  // a contrarian one; blend(z) mixes the resulting point mass with the
  // uniform distribution over grid points.
  static BeliefKernel distorted_bayes(const BeliefGrid& grid,
                                      const std::vector<SignalingPolicy>& policies,
                                      int num_receiver_values, int num_actions, int num_confounders,
                                      const std::vector<double>& kappa,
                                      const std::vector<double>& blend);

  // Mutates one row in place; test hook for fault injection.
  void perturb_row(const KernelContext& ctx, int target, double delta);

 private:
  size_t main_offset(const KernelContext& ctx) const;
  size_t initial_offset(const KernelContext& ctx) const;

  int nb_ = 0, nr_ = 0, na_ = 0, nq_ = 0, nz_ = 0, nu_ = 0;
  std::vector<double> main_;
  std::vector<double> init_;
  std::vector<uint8_t> main_defined_;
  std::vector<uint8_t> init_defined_;
};

// One completed round as the sender records it: (s_i, pi_i, q_i, a_i, rho^r_i).
struct RoundRecord {
  int s = -1;
  int u = -1;
  int q = -1;
  int a = -1;
  int r = -1;  // index into receiver_values

  friend auto operator<=>(const RoundRecord&, const RoundRecord&) = default;
};

// Realization of the sender's information vector delta_i: rounds 0..i-1.
struct InfoVector {
  std::vector<RoundRecord> rounds;

  int round_index() const { return static_cast<int>(rounds.size()); }
  InfoVector extended(const RoundRecord& rec) const;

  friend auto operator<=>(const InfoVector&, const InfoVector&) = default;
};

// Stochastic decision rule (delta_i, s_i) -> distribution over policy
// indices. Deterministic meta-policies are point-mass rows. Representations:
// a constant mixture, a feature table over a truncated window of past rounds
// (with the last-action reduction as the window-1 family used for policy
// search), or an exhaustive (delta, s) table for tiny horizons.
struct MetaPolicy {
  enum class Mode { kConstant, kLastAction, kWindow, kExhaustive };

  Mode mode = Mode::kConstant;
  int window = 1;
  int num_policies = 0;
  std::vector<double> weights;                            // kConstant
  std::map<std::vector<int>, std::vector<double>> rows;   // keyed rows otherwise
  std::string descriptor;

  std::vector<int> feature(const InfoVector& info, int s) const;
  // Distribution over policy indices; throws UnindexedContext when the
  // feature has no row.
  const std::vector<double>& probs(const InfoVector& info, int s) const;
  bool deterministic() const;

  static MetaPolicy constant(std::vector<double> weights, std::string descriptor = "");
  // Rows indexed by last action: key -1 = initial round, else action index.
  static MetaPolicy last_action(std::vector<std::vector<double>> rows_by_key, int num_actions,
                                std::string descriptor = "");
};

// Every deterministic window-1 (last-action) meta-policy over the given
// environment's policy set: |P|^(|A|+1) members.
struct EnvironmentSpec;
std::vector<MetaPolicy> enumerate_last_action_family(const EnvironmentSpec& env);

// All finite primitives of the sequential persuasion process.
struct EnvironmentSpec {
  std::string name;
  StateSpace states;
  Prior prior;
  std::vector<std::string> signals;
  RewardTable rewards;
  std::vector<SignalingPolicy> policies;
  ConfounderSpec confounder;
  BeliefGrid grid;
  BeliefKernel kernel;
  int horizon = 0;  // T; rounds i = 0..T
  TieBreak tie_break = TieBreak::kLexicographic;

  int num_states() const { return states.size(); }
  int num_signals() const { return static_cast<int>(signals.size()); }
  int num_actions() const { return rewards.num_actions(); }
  int num_policies() const { return static_cast<int>(policies.size()); }
  int num_confounders() const { return confounder.size(); }

  void validate() const;
};

struct TrajectoryRound {
  int s = -1, u = -1, q = -1, b = -1, a = -1;
  double receiver_reward = 0.0;
  double sender_reward = 0.0;
};

struct Trajectory {
  int z = -1;
  std::vector<TrajectoryRound> rounds;
};

struct ObservableRound {
  int s = -1, u = -1, q = -1, a = -1;
  double receiver_reward = 0.0;
  double sender_reward = 0.0;

  friend auto operator<=>(const ObservableRound&, const ObservableRound&) = default;
};

// Sender-visible projection tau^o: z and the belief path removed. y_{-1} is
// the fixed uniform-prior token and is implicit in every record.
struct ObservableTrajectory {
  std::vector<ObservableRound> rounds;

  double sender_return() const;

  friend auto operator<=>(const ObservableTrajectory&, const ObservableTrajectory&) = default;
};

struct Dataset {
  uint64_t env_hash = 0;
  uint64_t seed = 0;
  std::string strategy_descriptor;
  std::vector<ObservableTrajectory> records;

  size_t size() const { return records.size(); }
};

// The stored conditional row for the context (table lookup).
std::span<const double> belief_step(const BeliefKernel& kernel, const KernelContext& ctx);

// Identical contract to bp_core::best_response, with the environment's tie rule.
int receiver_act(const BeliefVector& belief, const RewardTable& rewards,
                 TieBreak tie = TieBreak::kLexicographic);

// One episode, fully deterministic given the seed. Draw order: z, then per
// round s_i, pi_i, q_i, b_i.
Trajectory simulate_episode(const EnvironmentSpec& env, const MetaPolicy& meta, uint64_t seed);

ObservableTrajectory observable(const Trajectory& traj);

// n independent episodes via per-episode derived seeds, projected to
// observable trajectories. Output is identical whether generated sequentially
// or in parallel.
Dataset generate_dataset(const EnvironmentSpec& env, const MetaPolicy& behavioral, uint64_t n,
                         uint64_t seed);

// Mean over n simulated episodes of the total sender reward.
double monte_carlo_value(const EnvironmentSpec& env, const MetaPolicy& meta, uint64_t n,
                         uint64_t seed);

// Conservative full-support check: every stored row strictly positive.
bool has_full_support(const MetaPolicy& meta);

}  // namespace bplab
