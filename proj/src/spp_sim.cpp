#include "bplab/spp_sim.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <thread>

namespace bplab {

ConfounderSpec ConfounderSpec::make(std::vector<std::string> values,
                                    std::vector<double> initial_dist) {
  if (values.empty() || values.size() != initial_dist.size()) {
    throw DimensionMismatch("ConfounderSpec: values/dist size mismatch");
  }
  auto dist = validated_distribution(std::move(initial_dist), "ConfounderSpec eta");
  return ConfounderSpec{std::move(values), std::move(dist)};
}

BeliefGrid BeliefGrid::make(std::vector<BeliefVector> points) {
  if (points.empty()) throw DimensionMismatch("BeliefGrid: empty");
  const int dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw DimensionMismatch("BeliefGrid: inconsistent dimensions");
  }
  for (size_t i = 0; i < points.size(); ++i) {
    for (size_t j = i + 1; j < points.size(); ++j) {
      if (l1_distance(points[i].probs, points[j].probs) <= 1e-9) {
        throw DimensionMismatch("BeliefGrid: points " + std::to_string(i) + " and " +
                                std::to_string(j) + " coincide");
      }
    }
  }
  const BeliefVector unif = BeliefVector::uniform(dim);
  int uniform_index = -1;
  for (size_t i = 0; i < points.size(); ++i) {
    if (l1_distance(points[i].probs, unif.probs) <= kProbTol) {
      uniform_index = static_cast<int>(i);
      break;
    }
  }
  if (uniform_index < 0) throw DimensionMismatch("BeliefGrid: uniform distribution missing");
  return BeliefGrid{std::move(points), uniform_index};
}

int BeliefGrid::nearest_l1(std::span<const double> belief) const {
  int best = 0;
  double best_d = l1_distance(points[0].probs, belief);
  for (size_t i = 1; i < points.size(); ++i) {
    const double d = l1_distance(points[i].probs, belief);
    if (d < best_d - 1e-15) {
      best = static_cast<int>(i);
      best_d = d;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// BeliefKernel
// ---------------------------------------------------------------------------

BeliefKernel::BeliefKernel(int nb, int nr, int na, int nq, int nz, int nu)
    : nb_(nb), nr_(nr), na_(na), nq_(nq), nz_(nz), nu_(nu) {
  const size_t main_rows =
      static_cast<size_t>(nb) * nr * na * static_cast<size_t>(nq) * nz * nu;
  const size_t init_rows = static_cast<size_t>(nq) * nz * nu;
  main_.assign(main_rows * nb, 0.0);
  init_.assign(init_rows * nb, 0.0);
  main_defined_.assign(main_rows, 0);
  init_defined_.assign(init_rows, 0);
}

size_t BeliefKernel::main_offset(const KernelContext& c) const {
  if (c.b_prev < 0 || c.b_prev >= nb_ || c.r_prev < 0 || c.r_prev >= nr_ || c.a_prev < 0 ||
      c.a_prev >= na_ || c.q < 0 || c.q >= nq_ || c.z < 0 || c.z >= nz_ || c.u < 0 || c.u >= nu_) {
    throw UnindexedContext("BeliefKernel: context index out of range");
  }
  size_t idx = static_cast<size_t>(c.b_prev);
  idx = idx * nr_ + c.r_prev;
  idx = idx * na_ + c.a_prev;
  idx = idx * nq_ + c.q;
  idx = idx * nz_ + c.z;
  idx = idx * nu_ + c.u;
  return idx;
}

size_t BeliefKernel::initial_offset(const KernelContext& c) const {
  if (c.q < 0 || c.q >= nq_ || c.z < 0 || c.z >= nz_ || c.u < 0 || c.u >= nu_) {
    throw UnindexedContext("BeliefKernel: initial context index out of range");
  }
  return (static_cast<size_t>(c.q) * nz_ + c.z) * nu_ + c.u;
}

std::span<const double> BeliefKernel::row(const KernelContext& ctx) const {
  if (ctx.initial) {
    const size_t off = initial_offset(ctx);
    if (!init_defined_[off]) throw UnindexedContext("BeliefKernel: initial row not set");
    return {init_.data() + off * nb_, static_cast<size_t>(nb_)};
  }
  const size_t off = main_offset(ctx);
  if (!main_defined_[off]) throw UnindexedContext("BeliefKernel: row not set");
  return {main_.data() + off * nb_, static_cast<size_t>(nb_)};
}

void BeliefKernel::set_row(const KernelContext& ctx, std::vector<double> probs) {
  if (static_cast<int>(probs.size()) != nb_) {
    throw DimensionMismatch("BeliefKernel::set_row: row size");
  }
  auto dist = validated_distribution(std::move(probs), "BeliefKernel row");
  if (ctx.initial) {
    const size_t off = initial_offset(ctx);
    std::copy(dist.begin(), dist.end(), init_.begin() + off * nb_);
    init_defined_[off] = 1;
  } else {
    const size_t off = main_offset(ctx);
    std::copy(dist.begin(), dist.end(), main_.begin() + off * nb_);
    main_defined_[off] = 1;
  }
}

bool BeliefKernel::fully_defined() const {
  return std::all_of(main_defined_.begin(), main_defined_.end(), [](uint8_t f) { return f; }) &&
         std::all_of(init_defined_.begin(), init_defined_.end(), [](uint8_t f) { return f; });
}

void BeliefKernel::perturb_row(const KernelContext& ctx, int target, double delta) {
  double* row = ctx.initial ? init_.data() + initial_offset(ctx) * nb_
                            : main_.data() + main_offset(ctx) * nb_;
  row[target] += delta;
}

namespace {

// Tilted Bayes update: posterior(s) proportional to prior(s) * pi(q|s)^w,
// with zero-likelihood states staying at zero (negative exponents cannot
// resurrect impossible states). Returns nothing when the signal is impossible
// under the prior's support.
std::optional<std::vector<double>> tilted_update(std::span<const double> prior,
                                                 const SignalingPolicy& policy, int q, double w) {
  std::vector<double> post(prior.size());
  double norm = 0.0;
  for (size_t s = 0; s < prior.size(); ++s) {
    const double lik = policy.table.at(static_cast<int>(s), q);
    post[s] = (lik > 0.0) ? prior[s] * std::pow(lik, w) : 0.0;
    norm += post[s];
  }
  if (norm <= 0.0) return std::nullopt;
  for (double& p : post) p /= norm;
  return post;
}

}  // namespace

BeliefKernel BeliefKernel::distorted_bayes(const BeliefGrid& grid,
                                           const std::vector<SignalingPolicy>& policies,
                                           int num_receiver_values, int num_actions,
                                           int num_confounders, const std::vector<double>& kappa,
                                           const std::vector<double>& blend) {
  const int nb = grid.size();
  const int nq = policies.empty() ? 0 : policies.front().num_signals();
  const int nu = static_cast<int>(policies.size());
  if (static_cast<int>(kappa.size()) != num_confounders ||
      static_cast<int>(blend.size()) != num_confounders) {
    throw DimensionMismatch("distorted_bayes: kappa/blend must have one entry per confounder");
  }
  BeliefKernel k(nb, num_receiver_values, num_actions, nq, num_confounders, nu);

  auto make_row = [&](std::span<const double> working_prior, int q, int z, int u, int fallback) {
    const double w = 1.0 + kappa[z];
    auto post = tilted_update(working_prior, policies[u], q, w);
    if (!post) {
      // Signal impossible under the working prior: reset to the uniform prior;
      // if impossible outright, the belief stays put.
      post = tilted_update(grid.points[grid.uniform_index].probs, policies[u], q, w);
    }
    const int target = post ? grid.nearest_l1(*post) : fallback;
    std::vector<double> row(static_cast<size_t>(nb), blend[z] / nb);
    row[target] += 1.0 - blend[z];
    return row;
  };

  for (int q = 0; q < nq; ++q) {
    for (int z = 0; z < num_confounders; ++z) {
      for (int u = 0; u < nu; ++u) {
        KernelContext init_ctx{.initial = true, .q = q, .z = z, .u = u};
        k.set_row(init_ctx,
                  make_row(grid.points[grid.uniform_index].probs, q, z, u, grid.uniform_index));
        for (int b = 0; b < nb; ++b) {
          auto row = make_row(grid.points[b].probs, q, z, u, b);
          for (int r = 0; r < num_receiver_values; ++r) {
            for (int a = 0; a < num_actions; ++a) {
              KernelContext ctx{.b_prev = b, .r_prev = r, .a_prev = a, .q = q, .z = z, .u = u};
              k.set_row(ctx, row);
            }
          }
        }
      }
    }
  }
  return k;
}

// ---------------------------------------------------------------------------
// InfoVector / MetaPolicy
// ---------------------------------------------------------------------------

InfoVector InfoVector::extended(const RoundRecord& rec) const {
  InfoVector next = *this;
  next.rounds.push_back(rec);
  return next;
}

std::vector<int> MetaPolicy::feature(const InfoVector& info, int s) const {
  switch (mode) {
    case Mode::kConstant:
      return {};
    case Mode::kLastAction:
      return {info.rounds.empty() ? -1 : info.rounds.back().a};
    case Mode::kWindow: {
      std::vector<int> key;
      const int n = info.round_index();
      const int from = std::max(0, n - window);
      key.push_back(n - from);
      for (int i = from; i < n; ++i) {
        const RoundRecord& r = info.rounds[i];
        key.insert(key.end(), {r.s, r.u, r.q, r.a, r.r});
      }
      key.push_back(s);
      return key;
    }
    case Mode::kExhaustive: {
      std::vector<int> key;
      for (const RoundRecord& r : info.rounds) key.insert(key.end(), {r.s, r.u, r.q, r.a, r.r});
      key.push_back(s);
      return key;
    }
  }
  return {};
}

const std::vector<double>& MetaPolicy::probs(const InfoVector& info, int s) const {
  if (mode == Mode::kConstant) return weights;
  auto it = rows.find(feature(info, s));
  if (it == rows.end()) {
    throw UnindexedContext("MetaPolicy '" + descriptor + "': no row for round " +
                           std::to_string(info.round_index()) + " feature");
  }
  return it->second;
}

bool MetaPolicy::deterministic() const {
  auto is_point = [](const std::vector<double>& w) {
    return std::count_if(w.begin(), w.end(), [](double x) { return x > 0.0; }) == 1;
  };
  if (mode == Mode::kConstant) return is_point(weights);
  return std::all_of(rows.begin(), rows.end(),
                     [&](const auto& kv) { return is_point(kv.second); });
}

MetaPolicy MetaPolicy::constant(std::vector<double> w, std::string descriptor) {
  MetaPolicy m;
  m.mode = Mode::kConstant;
  m.num_policies = static_cast<int>(w.size());
  m.weights = validated_distribution(std::move(w), "MetaPolicy constant");
  m.descriptor = descriptor.empty() ? "constant" : std::move(descriptor);
  return m;
}

MetaPolicy MetaPolicy::last_action(std::vector<std::vector<double>> rows_by_key, int num_actions,
                                   std::string descriptor) {
  if (static_cast<int>(rows_by_key.size()) != num_actions + 1) {
    throw DimensionMismatch("MetaPolicy::last_action: need one row per action plus initial");
  }
  MetaPolicy m;
  m.mode = Mode::kLastAction;
  m.num_policies = static_cast<int>(rows_by_key.front().size());
  for (int key = -1; key < num_actions; ++key) {
    auto row = validated_distribution(std::move(rows_by_key[key + 1]), "MetaPolicy last_action");
    if (static_cast<int>(row.size()) != m.num_policies) {
      throw DimensionMismatch("MetaPolicy::last_action: ragged rows");
    }
    m.rows[{key}] = std::move(row);
  }
  m.descriptor = descriptor.empty() ? "last_action" : std::move(descriptor);
  return m;
}

std::vector<MetaPolicy> enumerate_last_action_family(const EnvironmentSpec& env) {
  const int na = env.num_actions();
  const int np = env.num_policies();
  const int keys = na + 1;
  size_t count = 1;
  for (int i = 0; i < keys; ++i) count *= static_cast<size_t>(np);
  std::vector<MetaPolicy> family;
  family.reserve(count);
  for (size_t code = 0; code < count; ++code) {
    size_t rem = code;
    std::vector<std::vector<double>> rows;
    std::string desc = "la_det";
    for (int k = 0; k < keys; ++k) {
      const int choice = static_cast<int>(rem % np);
      rem /= np;
      std::vector<double> row(static_cast<size_t>(np), 0.0);
      row[choice] = 1.0;
      rows.push_back(std::move(row));
      desc += "_" + std::to_string(choice);
    }
    family.push_back(MetaPolicy::last_action(std::move(rows), na, desc));
  }
  return family;
}

// ---------------------------------------------------------------------------
// EnvironmentSpec
// ---------------------------------------------------------------------------

void EnvironmentSpec::validate() const {
  if (horizon < 0) throw DimensionMismatch("EnvironmentSpec: horizon must be >= 0");
  if (policies.empty()) throw EmptyPolicySet("EnvironmentSpec: policy set empty");
  if (static_cast<int>(prior.probs.size()) != num_states()) {
    throw DimensionMismatch("EnvironmentSpec: prior/state dims differ");
  }
  if (rewards.sender.rows != num_states()) {
    throw DimensionMismatch("EnvironmentSpec: reward tables/state dims differ");
  }
  for (const auto& pi : policies) {
    if (pi.table.rows != num_states() || pi.signals != signals) {
      throw DimensionMismatch("EnvironmentSpec: policy '" + pi.name +
                              "' does not match the environment signal set");
    }
  }
  for (const auto& point : grid.points) {
    if (point.size() != num_states()) {
      throw DimensionMismatch("EnvironmentSpec: belief grid dimension != |S|");
    }
  }
  if (kernel.num_grid_points() != grid.size()) {
    throw DimensionMismatch("EnvironmentSpec: kernel grid size != belief grid size");
  }
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

std::span<const double> belief_step(const BeliefKernel& kernel, const KernelContext& ctx) {
  return kernel.row(ctx);
}

int receiver_act(const BeliefVector& belief, const RewardTable& rewards, TieBreak tie) {
  return best_response(belief, rewards, tie);
}

Trajectory simulate_episode(const EnvironmentSpec& env, const MetaPolicy& meta, uint64_t seed) {
  Rng rng(seed);
  Trajectory traj;
  traj.z = rng.categorical(env.confounder.initial_dist);  // drawn once, constant thereafter
  InfoVector info;
  for (int i = 0; i <= env.horizon; ++i) {
    TrajectoryRound round;
    round.s = rng.categorical(env.prior.probs);
    round.u = rng.categorical(meta.probs(info, round.s));
    round.q = rng.categorical(env.policies[round.u].table.row(round.s));
    KernelContext ctx;
    if (i == 0) {
      ctx = KernelContext{.initial = true, .q = round.q, .z = traj.z, .u = round.u};
    } else {
      const TrajectoryRound& prev = traj.rounds.back();
      ctx = KernelContext{.b_prev = prev.b,
                          .r_prev = env.rewards.receiver_value_index(prev.receiver_reward),
                          .a_prev = prev.a,
                          .q = round.q,
                          .z = traj.z,
                          .u = round.u};
    }
    round.b = rng.categorical(belief_step(env.kernel, ctx));
    round.a = receiver_act(env.grid.points[round.b], env.rewards, env.tie_break);
    round.receiver_reward = env.rewards.receiver.at(round.s, round.a);
    round.sender_reward = env.rewards.sender.at(round.s, round.a);
    traj.rounds.push_back(round);
    info.rounds.push_back(RoundRecord{round.s, round.u, round.q, round.a,
                                      env.rewards.receiver_value_index(round.receiver_reward)});
  }
  return traj;
}

ObservableTrajectory observable(const Trajectory& traj) {
  ObservableTrajectory obs;
  obs.rounds.reserve(traj.rounds.size());
  for (const TrajectoryRound& r : traj.rounds) {
    obs.rounds.push_back(ObservableRound{r.s, r.u, r.q, r.a, r.receiver_reward, r.sender_reward});
  }
  return obs;
}

double ObservableTrajectory::sender_return() const {
  double total = 0.0;
  for (const auto& r : rounds) total += r.sender_reward;
  return total;
}

Dataset generate_dataset(const EnvironmentSpec& env, const MetaPolicy& behavioral, uint64_t n,
                         uint64_t seed) {
  if (n < 1) throw DimensionMismatch("generate_dataset: n must be >= 1");
  if (!has_full_support(behavioral)) {
    std::cerr << "warning: behavioral meta-policy '" << behavioral.descriptor
              << "' lacks full support over the policy set; the dataset may not "
                 "identify off-policy values\n";
  }
  Dataset ds;
  ds.seed = seed;
  ds.strategy_descriptor = behavioral.descriptor;
  ds.records.resize(n);

  auto fill = [&](uint64_t begin, uint64_t end) {
    for (uint64_t i = begin; i < end; ++i) {
      ds.records[i] = observable(simulate_episode(env, behavioral, derive_seed(seed, i)));
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (n >= 4096 && hw > 1) {
    // Episodes are seeded independently, so slot-parallel generation is
    // bit-identical to sequential generation.
    std::vector<std::thread> pool;
    const uint64_t chunk = (n + hw - 1) / hw;
    for (unsigned t = 0; t < hw; ++t) {
      const uint64_t b = t * chunk;
      if (b >= n) break;
      pool.emplace_back(fill, b, std::min(n, b + chunk));
    }
    for (auto& th : pool) th.join();
  } else {
    fill(0, n);
  }
  return ds;
}

double monte_carlo_value(const EnvironmentSpec& env, const MetaPolicy& meta, uint64_t n,
                         uint64_t seed) {
  if (n < 1) throw DimensionMismatch("monte_carlo_value: n must be >= 1");
  double total = 0.0;
  for (uint64_t i = 0; i < n; ++i) {
    const Trajectory traj = simulate_episode(env, meta, derive_seed(seed, i));
    for (const auto& r : traj.rounds) total += r.sender_reward;
  }
  return total / static_cast<double>(n);
}

bool has_full_support(const MetaPolicy& meta) {
  auto positive = [](const std::vector<double>& w) {
    return std::all_of(w.begin(), w.end(), [](double x) { return x > 0.0; });
  };
  if (meta.mode == MetaPolicy::Mode::kConstant) return positive(meta.weights);
  return std::all_of(meta.rows.begin(), meta.rows.end(),
                     [&](const auto& kv) { return positive(kv.second); });
}

}  // namespace bplab
