#include "bplab/pomdp_lift.hpp"

#include <algorithm>
#include <sstream>

namespace bplab {

namespace {

void flatten_delta(const InfoVector& delta, std::vector<int>& out) {
  for (const RoundRecord& r : delta.rounds) {
    out.push_back(r.s);
    out.push_back(r.u);
    out.push_back(r.q);
    out.push_back(r.a);
    out.push_back(r.r);
  }
}

}  // namespace

std::vector<int> PomdpState::key() const {
  std::vector<int> k{s, b_prev, z};
  flatten_delta(delta, k);
  return k;
}

std::vector<int> ObsKey::key() const {
  std::vector<int> k{s};
  flatten_delta(delta, k);
  return k;
}

size_t LiftedPomdp::total_states() const {
  size_t n = 0;
  for (const auto& level : states) n += level.size();
  return n;
}

namespace {

// Round outcome shared by the kernel assembly and the Markov validator: given
// (s_i, u_i) and the belief-update context, the joint distribution over
// (q_i, b_i) with the induced action and rewards.
struct RoundOutcome {
  int q = -1, b = -1, a = -1, r_idx = -1;
  double receiver_reward = 0.0, sender_reward = 0.0;
  double prob = 0.0;  // pi_u(q|s) * kernel(b | ctx)
};

std::vector<RoundOutcome> enumerate_round(const EnvironmentSpec& env, int s, int u,
                                          bool initial_round, int b_prev, int r_prev, int a_prev,
                                          int z) {
  std::vector<RoundOutcome> out;
  const SignalingPolicy& pi = env.policies[u];
  for (int q = 0; q < env.num_signals(); ++q) {
    const double pq = pi.table.at(s, q);
    if (pq <= 0.0) continue;
    KernelContext ctx;
    if (initial_round) {
      ctx = KernelContext{.initial = true, .q = q, .z = z, .u = u};
    } else {
      ctx = KernelContext{
          .b_prev = b_prev, .r_prev = r_prev, .a_prev = a_prev, .q = q, .z = z, .u = u};
    }
    const auto row = env.kernel.row(ctx);
    for (int b = 0; b < env.grid.size(); ++b) {
      if (row[b] <= 0.0) continue;
      RoundOutcome o;
      o.q = q;
      o.b = b;
      o.a = receiver_act(env.grid.points[b], env.rewards, env.tie_break);
      o.receiver_reward = env.rewards.receiver.at(s, o.a);
      o.sender_reward = env.rewards.sender.at(s, o.a);
      o.r_idx = env.rewards.receiver_value_index(o.receiver_reward);
      o.prob = pq * row[b];
      out.push_back(o);
    }
  }
  return out;
}

std::string describe_state(const EnvironmentSpec& env, const PomdpState& x) {
  std::ostringstream os;
  os << "t=" << x.t << " delta=[";
  for (size_t i = 0; i < x.delta.rounds.size(); ++i) {
    const auto& r = x.delta.rounds[i];
    if (i) os << " ";
    os << env.states.labels[r.s] << "/u" << r.u << "/" << env.signals[r.q] << "/"
       << env.rewards.actions[r.a];
  }
  os << "]";
  if (x.s >= 0) os << " s=" << env.states.labels[x.s];
  if (x.b_prev >= 0) os << " b=" << x.b_prev;
  if (x.z >= 0) os << " z=" << env.confounder.values[x.z];
  return os.str();
}

}  // namespace

LiftedPomdp build_pomdp(const EnvironmentSpec& env, size_t cap) {
  env.validate();
  LiftedPomdp p;
  p.env = env;
  p.horizon = env.horizon;
  p.num_actions = env.num_policies();
  const int T = env.horizon;
  p.states.resize(T + 2);
  p.observations.resize(T + 2);
  p.state_index.resize(T + 2);
  p.obs_index.resize(T + 2);
  p.obs_of_state.resize(T + 2);
  p.trans.resize(T + 1);
  p.reward_entering.resize(T + 2);

  // Level 0: (uniform token, s_0, z_0) with positive prior mass.
  std::map<std::vector<int>, PomdpState> level;
  for (int s = 0; s < env.num_states(); ++s) {
    if (env.prior.probs[s] <= 0.0) continue;
    for (int z = 0; z < env.num_confounders(); ++z) {
      if (env.confounder.initial_dist[z] <= 0.0) continue;
      PomdpState x{.t = 0, .delta = {}, .s = s, .b_prev = -1, .z = z};
      level.emplace(x.key(), x);
    }
  }

  size_t running_total = 0;
  auto freeze_level = [&](int t, std::map<std::vector<int>, PomdpState>& lv) {
    running_total += lv.size();
    if (running_total > cap) {
      throw StateSpaceTooLarge("build_pomdp: reachable state count " +
                               std::to_string(running_total) + " exceeds cap " +
                               std::to_string(cap));
    }
    for (auto& [key, x] : lv) {
      p.state_index[t].emplace(key, static_cast<int>(p.states[t].size()));
      p.states[t].push_back(x);
    }
    p.obs_of_state[t].resize(p.states[t].size());
    for (size_t i = 0; i < p.states[t].size(); ++i) {
      const PomdpState& x = p.states[t][i];
      ObsKey y{.t = t, .delta = x.delta, .s = (t <= T) ? x.s : -1};
      auto enc = y.key();
      auto it = p.obs_index[t].find(enc);
      if (it == p.obs_index[t].end()) {
        it = p.obs_index[t].emplace(enc, static_cast<int>(p.observations[t].size())).first;
        p.observations[t].push_back(y);
      }
      p.obs_of_state[t][i] = it->second;
    }
    p.reward_entering[t].resize(p.states[t].size(), 0.0);
    if (t >= 1) {
      for (size_t i = 0; i < p.states[t].size(); ++i) {
        const RoundRecord& last = p.states[t][i].delta.rounds.back();
        p.reward_entering[t][i] = env.rewards.sender.at(last.s, last.a);
      }
    }
  };
  freeze_level(0, level);

  for (int t = 0; t <= T; ++t) {
    std::map<std::vector<int>, PomdpState> next;
    // Pass 1: discover the reachable t+1 level.
    std::vector<std::vector<std::map<std::vector<int>, double>>> raw_rows(
        p.states[t].size(),
        std::vector<std::map<std::vector<int>, double>>(static_cast<size_t>(p.num_actions)));
    for (size_t xi = 0; xi < p.states[t].size(); ++xi) {
      const PomdpState& x = p.states[t][xi];
      const bool initial = (t == 0);
      int r_prev = -1, a_prev = -1;
      if (!initial) {
        const RoundRecord& last = x.delta.rounds.back();
        r_prev = last.r;
        a_prev = last.a;
      }
      for (int u = 0; u < p.num_actions; ++u) {
        for (const RoundOutcome& o :
             enumerate_round(env, x.s, u, initial, x.b_prev, r_prev, a_prev, x.z)) {
          InfoVector delta_next =
              x.delta.extended(RoundRecord{x.s, u, o.q, o.a, o.r_idx});
          if (t < T) {
            for (int s_next = 0; s_next < env.num_states(); ++s_next) {
              if (env.prior.probs[s_next] <= 0.0) continue;
              PomdpState xn{.t = t + 1, .delta = delta_next, .s = s_next, .b_prev = o.b, .z = x.z};
              auto key = xn.key();
              raw_rows[xi][u][key] += o.prob * env.prior.probs[s_next];
              next.emplace(std::move(key), std::move(xn));
            }
          } else {
            PomdpState xn{.t = T + 1, .delta = delta_next, .s = -1, .b_prev = o.b, .z = -1};
            auto key = xn.key();
            raw_rows[xi][u][key] += o.prob;
            next.emplace(std::move(key), std::move(xn));
          }
        }
      }
    }
    freeze_level(t + 1, next);
    // Pass 2: resolve target indices.
    p.trans[t].assign(p.states[t].size(),
                      std::vector<SparseRow>(static_cast<size_t>(p.num_actions)));
    for (size_t xi = 0; xi < p.states[t].size(); ++xi) {
      for (int u = 0; u < p.num_actions; ++u) {
        SparseRow& row = p.trans[t][xi][u];
        double total = 0.0;
        for (const auto& [key, prob] : raw_rows[xi][u]) {
          row.push_back(SparseEntry{p.state_index[t + 1].at(key), prob});
          total += prob;
        }
        if (!row.empty() && std::fabs(total - 1.0) > kKernelRowTol) {
          throw InternalInconsistency("build_pomdp: transition row sums to " +
                                      std::to_string(total) + " at t=" + std::to_string(t));
        }
      }
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Strategy correspondence
// ---------------------------------------------------------------------------

const std::vector<double>& ControlStrategy::row(int t, const std::vector<int>& obs_enc) const {
  if (t < 0 || t > horizon) {
    throw UndefinedOnReachableObservation("ControlStrategy: no control epoch t=" +
                                          std::to_string(t));
  }
  auto it = rows[t].find(obs_enc);
  if (it == rows[t].end()) {
    throw UndefinedOnReachableObservation("ControlStrategy '" + descriptor +
                                          "': undefined on an observation at t=" +
                                          std::to_string(t));
  }
  return it->second;
}

double ControlStrategy::action_prob(int t, const std::vector<int>& obs_enc, int u) const {
  return row(t, obs_enc)[u];
}

ControlStrategy lift_meta_policy(const MetaPolicy& meta, const LiftedPomdp& pomdp) {
  ControlStrategy g;
  g.horizon = pomdp.horizon;
  g.num_actions = pomdp.num_actions;
  g.descriptor = meta.descriptor;
  g.rows.resize(pomdp.horizon + 1);
  for (int t = 0; t <= pomdp.horizon; ++t) {
    for (const ObsKey& y : pomdp.observations[t]) {
      std::vector<double> row;
      try {
        row = meta.probs(y.delta, y.s);
      } catch (const UnindexedContext& e) {
        throw UndefinedOnReachableObservation(std::string("lift_meta_policy: ") + e.what());
      }
      if (static_cast<int>(row.size()) != pomdp.num_actions) {
        throw DimensionMismatch("lift_meta_policy: row width != |P|");
      }
      g.rows[t].emplace(y.key(), row);
    }
  }
  return g;
}

MetaPolicy lower_meta_policy(const ControlStrategy& strategy) {
  MetaPolicy meta;
  meta.mode = MetaPolicy::Mode::kExhaustive;
  meta.num_policies = strategy.num_actions;
  meta.descriptor = strategy.descriptor + "_lowered";
  for (int t = 0; t <= strategy.horizon; ++t) {
    for (const auto& [enc, row] : strategy.rows[t]) {
      // Observation encoding is [s, flattened records...]; the exhaustive
      // feature is [flattened records..., s].
      std::vector<int> feature(enc.begin() + 1, enc.end());
      feature.push_back(enc.front());
      meta.rows.emplace(std::move(feature), row);
    }
  }
  return meta;
}

// ---------------------------------------------------------------------------
// Validators
// ---------------------------------------------------------------------------

MarkovReport validate_markov(const EnvironmentSpec& env, const LiftedPomdp& pomdp,
                             size_t history_cap) {
  // A history node is the full path (x_0, u_0, ..., x_t); the joint weight is
  // re-derived from the raw primitives (mu, eta, pi, kernel, best response),
  // not from the assembled transition rows.
  struct Node {
    std::vector<int> x_path;  // state indices per level
    double prob;
  };
  MarkovReport report;
  const int T = pomdp.horizon;

  std::vector<Node> frontier;
  for (size_t xi = 0; xi < pomdp.states[0].size(); ++xi) {
    const PomdpState& x = pomdp.states[0][xi];
    frontier.push_back(
        Node{{static_cast<int>(xi)}, env.prior.probs[x.s] * env.confounder.initial_dist[x.z]});
  }

  std::vector<int> u_path;
  for (int t = 0; t <= T; ++t) {
    std::vector<Node> next_frontier;
    for (const Node& node : frontier) {
      if (node.prob <= 0.0) continue;
      const int xi = node.x_path.back();
      const PomdpState& x = pomdp.states[t][xi];
      const bool initial = (t == 0);
      int r_prev = -1, a_prev = -1;
      if (!initial) {
        const RoundRecord& last = x.delta.rounds.back();
        r_prev = last.r;
        a_prev = last.a;
      }
      for (int u = 0; u < pomdp.num_actions; ++u) {
        // Raw next-state distribution for this history and action.
        std::map<int, double> next_dist;
        for (const RoundOutcome& o :
             enumerate_round(env, x.s, u, initial, x.b_prev, r_prev, a_prev, x.z)) {
          InfoVector delta_next = x.delta.extended(RoundRecord{x.s, u, o.q, o.a, o.r_idx});
          if (t < T) {
            for (int s_next = 0; s_next < env.num_states(); ++s_next) {
              if (env.prior.probs[s_next] <= 0.0) continue;
              PomdpState xn{.t = t + 1, .delta = delta_next, .s = s_next, .b_prev = o.b, .z = x.z};
              next_dist[pomdp.state_index[t + 1].at(xn.key())] +=
                  o.prob * env.prior.probs[s_next];
            }
          } else {
            PomdpState xn{.t = T + 1, .delta = delta_next, .s = -1, .b_prev = o.b, .z = -1};
            next_dist[pomdp.state_index[t + 1].at(xn.key())] += o.prob;
          }
        }
        // Compare with the assembled kernel row p(x_{t+1} | x_t, u_t).
        std::map<int, double> kernel_row;
        for (const SparseEntry& e : pomdp.trans[t][xi][u]) kernel_row[e.target] = e.prob;
        double tv = 0.0;
        for (const auto& [tgt, prob] : next_dist) {
          auto it = kernel_row.find(tgt);
          tv += std::fabs(prob - (it == kernel_row.end() ? 0.0 : it->second));
          if (it != kernel_row.end()) kernel_row.erase(it);
        }
        for (const auto& [tgt, prob] : kernel_row) tv += std::fabs(prob);
        tv *= 0.5;
        ++report.histories_checked;
        if (tv > report.max_tv_gap) {
          report.max_tv_gap = tv;
          std::ostringstream os;
          os << "history at t=" << t << " [" << describe_state(env, x) << "] u=" << u;
          report.worst_history = os.str();
        }
        if (t < T) {
          for (const auto& [tgt, prob] : next_dist) {
            Node child{node.x_path, node.prob * prob};
            child.x_path.push_back(tgt);
            next_frontier.push_back(std::move(child));
            if (next_frontier.size() + frontier.size() > history_cap) {
              throw StateSpaceTooLarge("validate_markov: history count exceeds cap " +
                                       std::to_string(history_cap));
            }
          }
        }
      }
    }
    frontier = std::move(next_frontier);
  }
  return report;
}

std::string dump_diagnostic(const LiftedPomdp& pomdp, size_t max_triples) {
  std::ostringstream os;
  os << "lifted pomdp: horizon T=" << pomdp.horizon << " actions=" << pomdp.num_actions << "\n";
  for (size_t t = 0; t < pomdp.states.size(); ++t) {
    os << "  t=" << t << " |X|=" << pomdp.states[t].size()
       << " |Y|=" << pomdp.observations[t].size() << "\n";
  }
  size_t emitted = 0;
  for (size_t t = 0; t < pomdp.trans.size() && emitted < max_triples; ++t) {
    for (size_t x = 0; x < pomdp.trans[t].size() && emitted < max_triples; ++x) {
      for (size_t u = 0; u < pomdp.trans[t][x].size() && emitted < max_triples; ++u) {
        for (const SparseEntry& e : pomdp.trans[t][x][u]) {
          os << "  (t=" << t << " x=" << x << " u=" << u << ") -> x'=" << e.target << " p="
             << e.prob << "\n";
          if (++emitted >= max_triples) {
            os << "  ... truncated\n";
            break;
          }
        }
      }
    }
  }
  return os.str();
}

DisjointnessReport validate_time_disjointness(const LiftedPomdp& pomdp) {
  DisjointnessReport report;
  // State encodings unique across all levels.
  std::map<std::vector<int>, int> seen;
  for (size_t t = 0; t < pomdp.states.size(); ++t) {
    for (const PomdpState& x : pomdp.states[t]) {
      auto [it, inserted] = seen.emplace(x.key(), static_cast<int>(t));
      if (!inserted) {
        report.ok = false;
        report.offending = "state shared by levels t=" + std::to_string(it->second) +
                           " and t=" + std::to_string(t);
        return report;
      }
    }
  }
  // Transitions stay inside the next level and rows are stochastic.
  for (size_t t = 0; t < pomdp.trans.size(); ++t) {
    const size_t next_size = pomdp.states[t + 1].size();
    for (size_t xi = 0; xi < pomdp.trans[t].size(); ++xi) {
      for (size_t u = 0; u < pomdp.trans[t][xi].size(); ++u) {
        double total = 0.0;
        for (const SparseEntry& e : pomdp.trans[t][xi][u]) {
          if (e.target < 0 || static_cast<size_t>(e.target) >= next_size) {
            report.ok = false;
            report.offending = "transition out of level t+1 at (t=" + std::to_string(t) +
                               ", x=" + std::to_string(xi) + ", u=" + std::to_string(u) + ")";
            return report;
          }
          total += e.prob;
        }
        if (!pomdp.trans[t][xi][u].empty() && std::fabs(total - 1.0) > kKernelRowTol) {
          report.ok = false;
          report.offending = "row sum " + std::to_string(total) + " at (t=" + std::to_string(t) +
                             ", x=" + std::to_string(xi) + ", u=" + std::to_string(u) + ")";
          return report;
        }
      }
    }
  }
  return report;
}

}  // namespace bplab
