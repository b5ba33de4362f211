#include "bplab/bp_core.hpp"

#include <algorithm>
#include <set>

#include "bplab/kernels.hpp"

namespace bplab {

namespace {

void check_unique(const std::vector<std::string>& labels, const std::string& what) {
  std::set<std::string> seen(labels.begin(), labels.end());
  if (seen.size() != labels.size()) throw DimensionMismatch(what + ": duplicate labels");
  if (labels.empty()) throw DimensionMismatch(what + ": empty label set");
}

std::vector<double> distinct_sorted(const Mat& m) {
  std::vector<double> v(m.d.begin(), m.d.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

StateSpace StateSpace::make(std::vector<std::string> labels) {
  check_unique(labels, "StateSpace");
  return StateSpace{std::move(labels)};
}

int StateSpace::index_of(const std::string& label) const {
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return static_cast<int>(i);
  }
  throw DimensionMismatch("StateSpace: unknown label '" + label + "'");
}

Prior Prior::make(std::vector<double> probs) {
  return Prior{validated_distribution(std::move(probs), "Prior")};
}

SignalingPolicy SignalingPolicy::make(std::vector<std::string> signals, Mat table,
                                      std::string name) {
  check_unique(signals, "SignalingPolicy signals");
  if (table.cols != static_cast<int>(signals.size()) || table.rows <= 0) {
    throw DimensionMismatch("SignalingPolicy: table is " + std::to_string(table.rows) + "x" +
                            std::to_string(table.cols) + ", expected |S|x" +
                            std::to_string(signals.size()));
  }
  for (int s = 0; s < table.rows; ++s) {
    auto row = validated_distribution(std::vector<double>(table.row(s).begin(), table.row(s).end()),
                                      "SignalingPolicy row " + std::to_string(s));
    std::copy(row.begin(), row.end(), table.row(s).begin());
  }
  return SignalingPolicy{std::move(signals), std::move(table), std::move(name)};
}

RewardTable RewardTable::make(std::vector<std::string> actions, Mat sender, Mat receiver) {
  check_unique(actions, "RewardTable actions");
  if (sender.rows != receiver.rows || sender.cols != receiver.cols ||
      sender.cols != static_cast<int>(actions.size()) || sender.rows <= 0) {
    throw DimensionMismatch("RewardTable: sender/receiver/action dimensions disagree");
  }
  RewardTable t;
  t.actions = std::move(actions);
  t.sender = std::move(sender);
  t.receiver = std::move(receiver);
  t.sender_min = *std::min_element(t.sender.d.begin(), t.sender.d.end());
  t.sender_max = *std::max_element(t.sender.d.begin(), t.sender.d.end());
  t.receiver_min = *std::min_element(t.receiver.d.begin(), t.receiver.d.end());
  t.receiver_max = *std::max_element(t.receiver.d.begin(), t.receiver.d.end());
  t.sender_values = distinct_sorted(t.sender);
  t.receiver_values = distinct_sorted(t.receiver);
  return t;
}

int RewardTable::sender_value_index(double v) const {
  auto it = std::lower_bound(sender_values.begin(), sender_values.end(), v);
  if (it == sender_values.end() || *it != v) {
    throw InternalInconsistency("sender reward value not in table: " + std::to_string(v));
  }
  return static_cast<int>(it - sender_values.begin());
}

int RewardTable::receiver_value_index(double v) const {
  auto it = std::lower_bound(receiver_values.begin(), receiver_values.end(), v);
  if (it == receiver_values.end() || *it != v) {
    throw InternalInconsistency("receiver reward value not in table: " + std::to_string(v));
  }
  return static_cast<int>(it - receiver_values.begin());
}

BeliefVector BeliefVector::make(std::vector<double> probs) {
  return BeliefVector{validated_distribution(std::move(probs), "BeliefVector")};
}

BeliefVector BeliefVector::uniform(int n) {
  return BeliefVector{std::vector<double>(static_cast<size_t>(n), 1.0 / n)};
}

BeliefVector BeliefVector::point_mass(int n, int i) {
  std::vector<double> p(static_cast<size_t>(n), 0.0);
  p[static_cast<size_t>(i)] = 1.0;
  return BeliefVector{std::move(p)};
}

BeliefVector posterior(const SignalingPolicy& policy, const Prior& prior, int signal_index) {
  const int ns = static_cast<int>(prior.probs.size());
  if (policy.table.rows != ns) throw DimensionMismatch("posterior: prior/policy state dims differ");
  if (signal_index < 0 || signal_index >= policy.num_signals()) {
    throw DimensionMismatch("posterior: signal index out of range");
  }
  std::vector<double> post(static_cast<size_t>(ns));
  double marginal = 0.0;
  for (int s = 0; s < ns; ++s) {
    post[s] = policy.table.at(s, signal_index) * prior.probs[s];
    marginal += post[s];
  }
  if (marginal <= 0.0) {
    throw ZeroMarginalSignal("posterior: signal '" + policy.signals[signal_index] +
                             "' has zero marginal probability");
  }
  for (double& p : post) p /= marginal;
  return BeliefVector{std::move(post)};
}

int best_response(const BeliefVector& belief, const RewardTable& rewards, TieBreak tie) {
  if (belief.size() != rewards.receiver.rows) {
    throw DimensionMismatch("best_response: belief dim " + std::to_string(belief.size()) +
                            " vs state dim " + std::to_string(rewards.receiver.rows));
  }
  const int na = rewards.num_actions();
  std::vector<double> expected(static_cast<size_t>(na));
  Mat rt = transpose(rewards.receiver);  // action-major rows
  for (int a = 0; a < na; ++a) expected[a] = kernels::dot(belief.probs, rt.row(a));
  double best = *std::max_element(expected.begin(), expected.end());
  // Collect the argmax set with an absolute slack well under any reward gap
  // the tables can express at double precision.
  constexpr double kArgmaxSlack = 1e-13;
  int chosen = -1;
  double chosen_sender = 0.0;
  Mat st = transpose(rewards.sender);
  for (int a = 0; a < na; ++a) {
    if (expected[a] < best - kArgmaxSlack) continue;
    if (chosen < 0) {
      chosen = a;
      chosen_sender = kernels::dot(belief.probs, st.row(a));
      continue;
    }
    if (tie == TieBreak::kSenderPreferred) {
      const double sv = kernels::dot(belief.probs, st.row(a));
      if (sv > chosen_sender + kArgmaxSlack) {
        chosen = a;
        chosen_sender = sv;
      }
    }
  }
  return chosen;
}

double policy_value(const SignalingPolicy& policy, const Prior& prior, const RewardTable& rewards,
                    TieBreak tie) {
  const int ns = static_cast<int>(prior.probs.size());
  if (policy.table.rows != ns || rewards.sender.rows != ns) {
    throw DimensionMismatch("policy_value: inconsistent state dimensions");
  }
  double value = 0.0;
  for (int q = 0; q < policy.num_signals(); ++q) {
    double marginal = 0.0;
    for (int s = 0; s < ns; ++s) marginal += policy.table.at(s, q) * prior.probs[s];
    if (marginal <= 0.0) continue;  // zero weight in J
    const int a = best_response(posterior(policy, prior, q), rewards, tie);
    for (int s = 0; s < ns; ++s) {
      value += prior.probs[s] * policy.table.at(s, q) * rewards.sender.at(s, a);
    }
  }
  return value;
}

std::pair<int, double> solve_bp(const std::vector<SignalingPolicy>& policies, const Prior& prior,
                                const RewardTable& rewards, TieBreak tie) {
  if (policies.empty()) throw EmptyPolicySet("solve_bp: empty policy set");
  int best_idx = 0;
  double best_val = policy_value(policies[0], prior, rewards, tie);
  for (size_t i = 1; i < policies.size(); ++i) {
    const double v = policy_value(policies[i], prior, rewards, tie);
    if (v > best_val) {
      best_val = v;
      best_idx = static_cast<int>(i);
    }
  }
  return {best_idx, best_val};
}

}  // namespace bplab
