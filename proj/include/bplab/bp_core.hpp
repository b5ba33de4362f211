#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bplab/common.hpp"

// Static one-shot Bayesian persuasion: posterior formation, receiver best
// response, sender value of a signaling policy, and optimal policy selection
// by enumeration over a finite policy set.

namespace bplab {

struct StateSpace {
  std::vector<std::string> labels;

  int size() const { return static_cast<int>(labels.size()); }
  int index_of(const std::string& label) const;

  static StateSpace make(std::vector<std::string> labels);
};

struct Prior {
  std::vector<double> probs;

  static Prior make(std::vector<double> probs);
};

// Row-stochastic |S| x |Q| table pi(q|s).
struct SignalingPolicy {
  std::vector<std::string> signals;
  Mat table;
  std::string name;

  int num_signals() const { return static_cast<int>(signals.size()); }

  static SignalingPolicy make(std::vector<std::string> signals, Mat table, std::string name = "");
};

// Sender and receiver reward tables over |S| x |A|, with the derived bounds
// and the finite sets of distinct reward values each table realizes.
struct RewardTable {
  std::vector<std::string> actions;
  Mat sender;
  Mat receiver;

  double sender_min = 0.0, sender_max = 0.0;
  double receiver_min = 0.0, receiver_max = 0.0;
  std::vector<double> sender_values;    // sorted distinct entries of sender
  std::vector<double> receiver_values;  // sorted distinct entries of receiver

  int num_actions() const { return static_cast<int>(actions.size()); }
  int sender_value_index(double v) const;
  int receiver_value_index(double v) const;

  static RewardTable make(std::vector<std::string> actions, Mat sender, Mat receiver);
};

struct BeliefVector {
  std::vector<double> probs;

  int size() const { return static_cast<int>(probs.size()); }

  static BeliefVector make(std::vector<double> probs);
  static BeliefVector uniform(int n);
  static BeliefVector point_mass(int n, int i);
};

enum class TieBreak {
  kLexicographic,    // lowest canonical action index
  kSenderPreferred,  // among receiver-optimal actions, max sender expected reward
};

// Posterior p^pi(.|q) of the state given signal `signal_index`, by Bayes rule
// against the prior. Throws ZeroMarginalSignal when the signal has zero
// marginal probability under (prior, policy).
BeliefVector posterior(const SignalingPolicy& policy, const Prior& prior, int signal_index);

// argmax_a sum_s b(s) * rho_r(s,a); ties resolved by `tie`.
int best_response(const BeliefVector& belief, const RewardTable& rewards,
                  TieBreak tie = TieBreak::kLexicographic);

// J(pi) = sum_s sum_q mu(s) pi(q|s) rho_s(s, a*(q;pi)). Signals with zero
// marginal carry zero weight and are skipped.
double policy_value(const SignalingPolicy& policy, const Prior& prior, const RewardTable& rewards,
                    TieBreak tie = TieBreak::kLexicographic);

// Enumerates the given finite policy set; returns (index of maximizer, value),
// first maximizer on ties. Throws EmptyPolicySet.
std::pair<int, double> solve_bp(const std::vector<SignalingPolicy>& policies, const Prior& prior,
                                const RewardTable& rewards, TieBreak tie = TieBreak::kLexicographic);

}  // namespace bplab
