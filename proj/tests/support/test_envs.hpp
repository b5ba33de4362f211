#pragma once

#include <string>
#include <vector>

#include "bplab/spp_sim.hpp"

// Shared environment builders for the test and acceptance suites.
//
// "E2" is the two-of-everything benchmark family: |S|=|Q|=|A|=2, mu uniform,
// receiver reward = identity, sender rewarded only on a1, policy set
// {uninformative, fully informative}, |B|=3 grid containing the uniform
// point. The confounded variants distort the receiver's update per z.

namespace bplab::testenv {

inline RewardTable e2_rewards() {
  Mat sender(2, 2);
  sender.at(0, 1) = 1.0;
  sender.at(1, 1) = 1.0;
  Mat receiver(2, 2);
  receiver.at(0, 0) = 1.0;
  receiver.at(1, 1) = 1.0;
  return RewardTable::make({"a0", "a1"}, std::move(sender), std::move(receiver));
}

// The informative policy is soft (0.9/0.1) so signals never have zero
// likelihood anywhere: contrarian belief distortions act on every signal and
// all conditional matrices keep full support.
inline std::vector<SignalingPolicy> e2_policies() {
  Mat uninformative(2, 2, 0.5);
  Mat informative(2, 2);
  informative.at(0, 0) = 0.9;
  informative.at(0, 1) = 0.1;
  informative.at(1, 0) = 0.1;
  informative.at(1, 1) = 0.9;
  return {SignalingPolicy::make({"q0", "q1"}, std::move(uninformative), "uninformative"),
          SignalingPolicy::make({"q0", "q1"}, std::move(informative), "informative")};
}

inline BeliefGrid e2_grid() {
  return BeliefGrid::make({BeliefVector::make({0.5, 0.5}), BeliefVector::make({0.9, 0.1}),
                           BeliefVector::make({0.1, 0.9})});
}

// kappa/blend have one entry per confounder value; nz = 1 gives the
// unconfounded baseline.
inline EnvironmentSpec e2_env(int horizon, const std::vector<double>& kappa,
                              const std::vector<double>& blend) {
  EnvironmentSpec env;
  env.name = "e2_T" + std::to_string(horizon) + "_Z" + std::to_string(kappa.size());
  env.states = StateSpace::make({"s0", "s1"});
  env.prior = Prior::make({0.5, 0.5});
  env.signals = {"q0", "q1"};
  env.rewards = e2_rewards();
  env.policies = e2_policies();
  std::vector<std::string> z_labels;
  for (size_t z = 0; z < kappa.size(); ++z) z_labels.push_back("z" + std::to_string(z));
  env.confounder = ConfounderSpec::make(
      z_labels, std::vector<double>(kappa.size(), 1.0 / static_cast<double>(kappa.size())));
  env.grid = e2_grid();
  env.kernel = BeliefKernel::distorted_bayes(
      env.grid, env.policies, static_cast<int>(env.rewards.receiver_values.size()),
      env.num_actions(), static_cast<int>(kappa.size()), kappa, blend);
  env.horizon = horizon;
  return env;
}

inline EnvironmentSpec e2_unconfounded(int horizon) { return e2_env(horizon, {0.0}, {0.1}); }

// |Z| = 2: a neutral receiver and a contrarian one (negative tilt), both with
// a little kernel spread so every grid point stays reachable.
inline EnvironmentSpec e2_confounded(int horizon) {
  return e2_env(horizon, {0.0, -2.0}, {0.1, 0.1});
}

// All spaces singleton, horizon 0.
inline EnvironmentSpec degenerate_env() {
  EnvironmentSpec env;
  env.name = "degenerate";
  env.states = StateSpace::make({"s0"});
  env.prior = Prior::make({1.0});
  env.signals = {"q0"};
  env.rewards = RewardTable::make({"a0"}, Mat(1, 1, 2.5), Mat(1, 1, 1.0));
  env.policies = {SignalingPolicy::make({"q0"}, Mat(1, 1, 1.0), "only")};
  env.confounder = ConfounderSpec::make({"z0"}, {1.0});
  env.grid = BeliefGrid::make({BeliefVector::make({1.0})});
  env.kernel = BeliefKernel::distorted_bayes(env.grid, env.policies, 1, 1, 1, {0.0}, {0.0});
  env.horizon = 0;
  return env;
}

// Confounded variant without E2's label-swap symmetry: asymmetric prior and
// reward tables, so strategy values genuinely depend on the confounder mix.
inline EnvironmentSpec asym_confounded(int horizon) {
  EnvironmentSpec env = e2_env(horizon, {0.3, -2.0}, {0.15, 0.05});
  env.name = "asym_Z2_T" + std::to_string(horizon);
  env.prior = Prior::make({0.4, 0.6});
  Mat sender(2, 2);
  sender.at(0, 1) = 1.0;
  sender.at(1, 0) = 0.2;
  sender.at(1, 1) = 0.5;
  Mat receiver(2, 2);
  receiver.at(0, 0) = 1.0;
  receiver.at(1, 1) = 0.7;
  env.rewards = RewardTable::make({"a0", "a1"}, std::move(sender), std::move(receiver));
  env.confounder = ConfounderSpec::make({"z0", "z1"}, {0.35, 0.65});
  env.kernel = BeliefKernel::distorted_bayes(env.grid, env.policies,
                                             static_cast<int>(env.rewards.receiver_values.size()),
                                             env.num_actions(), 2, {0.3, -2.0}, {0.15, 0.05});
  return env;
}

// Sender reward identically zero, otherwise E2.
inline EnvironmentSpec e2_zero_sender(int horizon) {
  EnvironmentSpec env = e2_unconfounded(horizon);
  env.name = "e2_zero_sender";
  env.rewards = RewardTable::make({"a0", "a1"}, Mat(2, 2, 0.0), [&] {
    Mat receiver(2, 2);
    receiver.at(0, 0) = 1.0;
    receiver.at(1, 1) = 1.0;
    return receiver;
  }());
  return env;
}

inline MetaPolicy e2_behavioral() { return MetaPolicy::constant({0.5, 0.5}, "behavioral_mix"); }

inline std::vector<MetaPolicy> e2_eval_strategies() {
  return {
      MetaPolicy::constant({0.2, 0.8}, "mostly_informative"),
      MetaPolicy::constant({0.8, 0.2}, "mostly_uninformative"),
      MetaPolicy::last_action({{0.5, 0.5}, {0.9, 0.1}, {0.1, 0.9}}, 2, "react_last_action"),
      MetaPolicy::constant({0.0, 1.0}, "always_informative"),
  };
}

}  // namespace bplab::testenv
