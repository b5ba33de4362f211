#include "bplab/exact_oracle.hpp"

#include <algorithm>
#include <cmath>

namespace bplab {

double TrajectoryDistribution::mass(int t) const {
  double m = 0.0;
  for (const auto& [k, p] : full[t]) m += p;
  return m;
}

TrajectoryDistribution exact_traj_dist(const LiftedPomdp& pomdp, const ControlStrategy& strategy,
                                       size_t cap) {
  const int T = pomdp.horizon;
  TrajectoryDistribution dist;
  dist.horizon = T;
  dist.full.resize(T + 2);
  dist.observable.resize(T + 2);

  struct Node {
    std::vector<int> path;  // alternating x, u
    double prob;
  };
  std::vector<Node> frontier;
  for (size_t xi = 0; xi < pomdp.states[0].size(); ++xi) {
    const PomdpState& x = pomdp.states[0][xi];
    const double p0 =
        pomdp.env.prior.probs[x.s] * pomdp.env.confounder.initial_dist[x.z];
    if (p0 <= 0.0) continue;
    frontier.push_back(Node{{static_cast<int>(xi)}, p0});
  }

  size_t node_count = 0;
  for (int t = 0; t <= T + 1; ++t) {
    std::vector<Node> next_frontier;
    for (const Node& node : frontier) {
      const int xi = node.path.back();
      const int yi = pomdp.obs_of_state[t][xi];
      if (t == T + 1) {
        dist.full[t][node.path] += node.prob;
        dist.observable[t][{yi}] += node.prob;
        continue;
      }
      const auto& action_row = strategy.row(t, pomdp.observations[t][yi].key());
      for (int u = 0; u < pomdp.num_actions; ++u) {
        const double pu = action_row[u];
        if (pu <= 0.0) continue;
        std::vector<int> tagged = node.path;
        tagged.push_back(u);
        dist.full[t][tagged] += node.prob * pu;
        dist.observable[t][{yi, u}] += node.prob * pu;
        for (const SparseEntry& e : pomdp.trans[t][xi][u]) {
          if (e.prob <= 0.0) continue;
          Node child{tagged, node.prob * pu * e.prob};
          child.path.push_back(e.target);
          next_frontier.push_back(std::move(child));
          if (++node_count > cap) {
            throw StateSpaceTooLarge("exact_traj_dist: trajectory count exceeds cap " +
                                     std::to_string(cap));
          }
        }
      }
    }
    frontier = std::move(next_frontier);
  }
  return dist;
}

RewardDistribution exact_reward_dist(const LiftedPomdp& pomdp,
                                     const TrajectoryDistribution& dist, int t) {
  if (t < 0 || t > pomdp.horizon) {
    throw EpochOutOfRange("exact_reward_dist: t=" + std::to_string(t) + " outside 0.." +
                          std::to_string(pomdp.horizon));
  }
  RewardDistribution rd;
  rd.values = pomdp.env.rewards.sender_values;
  rd.probs.assign(rd.values.size(), 0.0);
  // r_t is a function of x_{t+1}; sum the level-(t+1) trajectory masses.
  const int level = t + 1;
  for (const auto& [path, prob] : dist.full[level]) {
    const int xi = path[static_cast<size_t>(2 * level)];
    const double r = pomdp.reward_entering[level][xi];
    rd.probs[pomdp.env.rewards.sender_value_index(r)] += prob;
  }
  return rd;
}

double exact_value(const LiftedPomdp& pomdp, const ControlStrategy& strategy) {
  const TrajectoryDistribution dist = exact_traj_dist(pomdp, strategy);
  const int T = pomdp.horizon;
  // Route 1: expectation of the summed rewards over final trajectories.
  double direct = 0.0;
  for (const auto& [path, prob] : dist.full[T + 1]) {
    double total = 0.0;
    for (int level = 1; level <= T + 1; ++level) {
      total += pomdp.reward_entering[level][path[static_cast<size_t>(2 * level)]];
    }
    direct += prob * total;
  }
  // Route 2: per-epoch reward distributions pushed through the values.
  double via_dist = 0.0;
  for (int t = 0; t <= T; ++t) via_dist += exact_reward_dist(pomdp, dist, t).mean();
  if (std::fabs(direct - via_dist) > 1e-10) {
    throw InternalInconsistency("exact_value: trajectory route " + std::to_string(direct) +
                                " vs reward-distribution route " + std::to_string(via_dist));
  }
  return direct;
}

RewardDistribution exact_reward_dist(const LiftedPomdp& pomdp, const ControlStrategy& strategy,
                                     int t) {
  return exact_reward_dist(pomdp, exact_traj_dist(pomdp, strategy), t);
}

MatrixBundle population_matrices(const LiftedPomdp& pomdp, const ControlStrategy& behavioral) {
  const TrajectoryDistribution dist = exact_traj_dist(pomdp, behavioral);
  const int T = pomdp.horizon;

  MatrixBundle b;
  b.provenance = MatrixBundle::Provenance::kPopulation;
  b.horizon = T;
  b.num_actions = pomdp.num_actions;
  b.sender_values = pomdp.env.rewards.sender_values;
  b.obs_enc.resize(T + 2);
  b.obs_index.resize(T + 2);
  b.joint.resize(T + 2);
  b.marginal.resize(T + 2);
  b.parent.resize(T + 2);
  b.emb_action.resize(T + 2);
  b.reward_entering.resize(T + 2);
  b.cell.resize(T + 2);

  // Behavioral-reachable observations per level, in the pomdp's canonical
  // (sorted-encoding) order; zero-probability realizations are excluded.
  for (int t = 0; t <= T + 1; ++t) {
    std::map<int, std::vector<double>> mass_by_obs;  // pomdp obs idx -> per-action mass
    const int width = (t <= T) ? pomdp.num_actions : 1;
    for (const auto& [key, prob] : dist.observable[t]) {
      auto& row = mass_by_obs[key[0]];
      row.resize(static_cast<size_t>(width), 0.0);
      row[(t <= T) ? key[1] : 0] += prob;
    }
    b.joint[t] = Mat(static_cast<int>(mass_by_obs.size()), width);
    for (const auto& [obs_idx, row] : mass_by_obs) {
      const ObsKey& y = pomdp.observations[t][obs_idx];
      const int local = static_cast<int>(b.obs_enc[t].size());
      b.obs_enc[t].push_back(y.key());
      b.obs_index[t].emplace(y.key(), local);
      for (int u = 0; u < width; ++u) b.joint[t].at(local, u) = row[u];
      b.marginal[t].push_back(0.0);
      if (t >= 1) {
        const RoundRecord& last = y.delta.rounds.back();
        ObsKey parent_key{.t = t - 1, .delta = y.delta, .s = last.s};
        parent_key.delta.rounds.pop_back();
        b.parent[t].push_back(b.obs_index[t - 1].at(parent_key.key()));
        b.emb_action[t].push_back(last.u);
        b.reward_entering[t].push_back(pomdp.env.rewards.sender.at(last.s, last.a));
      }
    }
    for (int y = 0; y < b.num_obs(t); ++y) {
      b.marginal[t][y] = 0.0;
      for (int u = 0; u < width; ++u) b.marginal[t][y] += b.joint[t].at(y, u);
    }
  }

  // Conditioning-cell masses and zero-cell diagnostics.
  b.cell0.assign(static_cast<size_t>(pomdp.num_actions), 0.0);
  for (int y = 0; y < b.num_obs(0); ++y) {
    for (int u = 0; u < pomdp.num_actions; ++u) b.cell0[u] += b.joint[0].at(y, u);
  }
  for (int u = 0; u < pomdp.num_actions; ++u) {
    if (b.cell0[u] <= 0.0) b.empty_cell_notes.push_back("cell (y_-1, u_0=" + std::to_string(u) + ") empty");
  }
  for (int t = 1; t <= T + 1; ++t) {
    const int width = (t <= T) ? pomdp.num_actions : 1;
    b.cell[t] = Mat(b.num_obs(t - 1), width);
    for (int y = 0; y < b.num_obs(t); ++y) {
      for (int u = 0; u < width; ++u) b.cell[t].at(b.parent[t][y], u) += b.joint[t].at(y, u);
    }
    for (int p = 0; p < b.num_obs(t - 1); ++p) {
      for (int u = 0; u < width; ++u) {
        if (b.cell[t].at(p, u) <= 0.0) {
          b.empty_cell_notes.push_back("cell (" + b.obs_label(t - 1, p) + ", u_" +
                                       std::to_string(t) + "=" + std::to_string(u) + ") empty");
        }
      }
    }
  }
  b.validate();
  return b;
}

}  // namespace bplab
