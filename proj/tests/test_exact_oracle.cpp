#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bplab/exact_oracle.hpp"
#include "support/spp_enum_oracle.hpp"
#include "support/test_envs.hpp"

using namespace bplab;

TEST_CASE("degenerate environment: point mass on the unique trajectory") {
  const LiftedPomdp pomdp = build_pomdp(testenv::degenerate_env());
  const ControlStrategy g = lift_meta_policy(MetaPolicy::constant({1.0}), pomdp);
  const TrajectoryDistribution dist = exact_traj_dist(pomdp, g);
  REQUIRE(dist.full[1].size() == 1);
  CHECK(dist.full[1].begin()->second == doctest::Approx(1.0));
  CHECK(exact_value(pomdp, g) == doctest::Approx(2.5));
  const RewardDistribution rd = exact_reward_dist(pomdp, g, 0);
  REQUIRE(rd.values.size() == 1);
  CHECK(rd.probs[0] == doctest::Approx(1.0));
}

TEST_CASE("per-epoch trajectory masses are normalized") {
  const LiftedPomdp pomdp = build_pomdp(testenv::e2_confounded(2));
  const ControlStrategy g = lift_meta_policy(testenv::e2_behavioral(), pomdp);
  const TrajectoryDistribution dist = exact_traj_dist(pomdp, g);
  for (int t = 0; t <= pomdp.horizon + 1; ++t) {
    CHECK(std::fabs(dist.mass(t) - 1.0) <= 1e-10);
    double obs_mass = 0.0;
    for (const auto& [k, p] : dist.observable[t]) obs_mass += p;
    CHECK(std::fabs(obs_mass - 1.0) <= 1e-10);
  }
}

TEST_CASE("lifted strategies reproduce the sequential-process distribution exactly") {
  // Strategy correspondence at machine precision, against the independent
  // enumeration of the persuasion process itself.
  const EnvironmentSpec env = testenv::e2_confounded(2);
  const LiftedPomdp pomdp = build_pomdp(env);
  const MetaPolicy meta =
      MetaPolicy::last_action({{0.5, 0.5}, {0.7, 0.3}, {0.2, 0.8}}, 2, "react");
  const ControlStrategy g = lift_meta_policy(meta, pomdp);
  const TrajectoryDistribution lifted = exact_traj_dist(pomdp, g);
  const testenv::ObsDist spp = testenv::spp_observable_dist(env, meta);
  for (int t = 0; t <= env.horizon + 1; ++t) {
    // Convert the lifted observable keys to structural encodings.
    std::map<std::vector<int>, double> lifted_structural;
    for (const auto& [key, p] : lifted.observable[t]) {
      std::vector<int> enc = pomdp.observations[t][key[0]].key();
      if (t <= env.horizon) enc.push_back(key[1]);
      lifted_structural[std::move(enc)] += p;
    }
    double tv = 0.0;
    for (const auto& [k, p] : spp[t]) {
      auto it = lifted_structural.find(k);
      tv += std::fabs(p - (it == lifted_structural.end() ? 0.0 : it->second));
      if (it != lifted_structural.end()) lifted_structural.erase(it);
    }
    for (const auto& [k, p] : lifted_structural) tv += std::fabs(p);
    CHECK(0.5 * tv <= 1e-12);
  }
}

TEST_CASE("exact trajectory distribution matches seeded simulation frequencies") {
  const EnvironmentSpec env = testenv::e2_confounded(1);
  const LiftedPomdp pomdp = build_pomdp(env);
  const MetaPolicy behavioral = testenv::e2_behavioral();
  const ControlStrategy g = lift_meta_policy(behavioral, pomdp);
  const TrajectoryDistribution dist = exact_traj_dist(pomdp, g);

  const uint64_t n = 1000000;
  std::map<std::vector<int>, double> empirical;
  for (uint64_t i = 0; i < n; ++i) {
    const Trajectory traj = simulate_episode(env, behavioral, derive_seed(55, i));
    std::vector<int> key;
    InfoVector delta;
    for (int t = 0; t <= env.horizon; ++t) {
      const TrajectoryRound& r = traj.rounds[t];
      delta.rounds.push_back(RoundRecord{
          r.s, r.u, r.q, r.a, env.rewards.receiver_value_index(r.receiver_reward)});
    }
    ObsKey y{.t = env.horizon + 1, .delta = delta, .s = -1};
    empirical[y.key()] += 1.0 / static_cast<double>(n);
  }
  std::map<std::vector<int>, double> exact;
  for (const auto& [key, p] : dist.observable[env.horizon + 1]) {
    exact[pomdp.observations[env.horizon + 1][key[0]].key()] += p;
  }
  double tv = 0.0;
  for (const auto& [k, p] : exact) {
    auto it = empirical.find(k);
    tv += std::fabs(p - (it == empirical.end() ? 0.0 : it->second));
    if (it != empirical.end()) empirical.erase(it);
  }
  for (const auto& [k, p] : empirical) tv += std::fabs(p);
  CHECK(0.5 * tv <= 5e-3);
}

TEST_CASE("exact_value: trivial reward shapes and agreement with Monte Carlo") {
  {
    const LiftedPomdp pomdp = build_pomdp(testenv::e2_zero_sender(2));
    const ControlStrategy g = lift_meta_policy(testenv::e2_behavioral(), pomdp);
    CHECK(exact_value(pomdp, g) == doctest::Approx(0.0).scale(1));
  }
  {
    EnvironmentSpec constant = testenv::e2_env(1, {0.0}, {0.1});
    constant.rewards =
        RewardTable::make({"a0", "a1"}, Mat(2, 2, 1.25), constant.rewards.receiver);
    const LiftedPomdp pomdp = build_pomdp(constant);
    const ControlStrategy g = lift_meta_policy(testenv::e2_behavioral(), pomdp);
    CHECK(exact_value(pomdp, g) == doctest::Approx(2.5).epsilon(1e-12));
  }
  {
    const EnvironmentSpec env = testenv::e2_confounded(1);
    const LiftedPomdp pomdp = build_pomdp(env);
    const MetaPolicy informative = MetaPolicy::constant({0.0, 1.0}, "always_informative");
    const double exact = exact_value(pomdp, lift_meta_policy(informative, pomdp));
    const double mc = monte_carlo_value(env, informative, 200000, 9);
    CHECK(std::fabs(exact - mc) <= 0.01);
  }
}

TEST_CASE("exact_reward_dist: degenerate shapes and the push-forward identity") {
  {
    const LiftedPomdp pomdp = build_pomdp(testenv::e2_zero_sender(1));
    const ControlStrategy g = lift_meta_policy(testenv::e2_behavioral(), pomdp);
    const RewardDistribution rd = exact_reward_dist(pomdp, g, 1);
    REQUIRE(rd.values.size() == 1);
    CHECK(rd.values[0] == 0.0);
    CHECK(rd.probs[0] == doctest::Approx(1.0));
  }
  const EnvironmentSpec env = testenv::e2_confounded(2);
  const LiftedPomdp pomdp = build_pomdp(env);
  const ControlStrategy g = lift_meta_policy(testenv::e2_behavioral(), pomdp);
  const TrajectoryDistribution dist = exact_traj_dist(pomdp, g);
  for (int t = 0; t <= env.horizon; ++t) {
    const RewardDistribution rd = exact_reward_dist(pomdp, g, t);
    // Independent push-forward: marginalize the observable distribution at
    // t+1 through the reward embedded in the delta tail.
    std::vector<double> pushed(rd.values.size(), 0.0);
    for (const auto& [key, p] : dist.observable[t + 1]) {
      const ObsKey& y = pomdp.observations[t + 1][key[0]];
      const RoundRecord& last = y.delta.rounds.back();
      pushed[env.rewards.sender_value_index(env.rewards.sender.at(last.s, last.a))] += p;
    }
    for (size_t i = 0; i < pushed.size(); ++i) {
      CHECK(std::fabs(pushed[i] - rd.probs[i]) <= 1e-12);
    }
  }
  CHECK_THROWS_AS(exact_reward_dist(pomdp, g, env.horizon + 1), EpochOutOfRange);
}

TEST_CASE("lowered strategies evaluate under Monte Carlo to the exact strategy value") {
  const EnvironmentSpec env = testenv::e2_confounded(1);
  const LiftedPomdp pomdp = build_pomdp(env);
  const ControlStrategy g = lift_meta_policy(MetaPolicy::constant({0.3, 0.7}, "mix37"), pomdp);
  const MetaPolicy lowered = lower_meta_policy(g);
  const double mc = monte_carlo_value(env, lowered, 200000, 77);
  CHECK(std::fabs(mc - exact_value(pomdp, g)) <= 0.01);
}

TEST_CASE("strategies identical on reachable observations give identical outputs") {
  const LiftedPomdp pomdp = build_pomdp(testenv::e2_confounded(1));
  const ControlStrategy g = lift_meta_policy(testenv::e2_behavioral(), pomdp);
  ControlStrategy padded = g;
  padded.rows[1][{99, 99, 99, 99, 99, 99}] = {1.0, 0.0};  // unreachable junk row
  CHECK(exact_value(pomdp, g) == exact_value(pomdp, padded));
}

TEST_CASE("population matrices: degenerate env collapses to unit 1x1 matrices") {
  const LiftedPomdp pomdp = build_pomdp(testenv::degenerate_env());
  const ControlStrategy g = lift_meta_policy(MetaPolicy::constant({1.0}), pomdp);
  const MatrixBundle b = population_matrices(pomdp, g);
  CHECK_FALSE(b.has_empty_cells());
  const ConditionalMatrix d = b.cond_y_given_prev(1, -1);
  REQUIRE(d.values.rows == 1);
  REQUIRE(d.values.cols == 1);
  CHECK(d.values.at(0, 0) == doctest::Approx(1.0));
  CHECK(b.cond_y0_given_u(0).values.at(0, 0) == doctest::Approx(1.0));
  CHECK(b.marginal_y0().values.at(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("population conditional matrices are column-stochastic on support") {
  const LiftedPomdp pomdp = build_pomdp(testenv::e2_confounded(2));
  const ControlStrategy g = lift_meta_policy(testenv::e2_behavioral(), pomdp);
  const MatrixBundle b = population_matrices(pomdp, g);
  CHECK_FALSE(b.has_empty_cells());
  for (int t = 1; t <= b.horizon + 1; ++t) {
    const int actions = (t <= b.horizon) ? b.num_actions : 1;
    for (int u = 0; u < actions; ++u) {
      const ConditionalMatrix d = b.cond_y_given_prev(t, (t <= b.horizon) ? u : -1);
      d.validate();
      for (int c = 0; c < d.values.cols; ++c) {
        double col = 0.0;
        for (int r = 0; r < d.values.rows; ++r) col += d.values.at(r, c);
        CHECK(std::fabs(col - 1.0) <= 1e-10);
      }
    }
  }
  for (int u = 0; u < b.num_actions; ++u) {
    const ConditionalMatrix y0 = b.cond_y0_given_u(u);
    double col = 0.0;
    for (int r = 0; r < y0.values.rows; ++r) col += y0.values.at(r, 0);
    CHECK(std::fabs(col - 1.0) <= 1e-10);
  }
}

TEST_CASE("population matrices flag unsupported behavioral actions") {
  const LiftedPomdp pomdp = build_pomdp(testenv::e2_confounded(1));
  const ControlStrategy hole =
      lift_meta_policy(MetaPolicy::constant({1.0, 0.0}, "no_informative"), pomdp);
  const MatrixBundle b = population_matrices(pomdp, hole);
  CHECK(b.has_empty_cells());
  CHECK_THROWS_AS(b.cond_y0_given_u(1), UnsupportedAction);
}
