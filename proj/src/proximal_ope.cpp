#include "bplab/proximal_ope.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace bplab {

double RewardDistribution::mean() const {
  double m = 0.0;
  for (size_t i = 0; i < values.size(); ++i) m += values[i] * probs[i];
  return m;
}

// ---------------------------------------------------------------------------
// MatrixBundle
// ---------------------------------------------------------------------------

std::string MatrixBundle::obs_label(int t, int y) const {
  std::ostringstream os;
  os << "y" << t << "#" << y << "(";
  const auto& enc = obs_enc[t][y];
  for (size_t i = 0; i < enc.size(); ++i) {
    if (i) os << ",";
    os << enc[i];
  }
  os << ")";
  return os.str();
}

void MatrixBundle::validate() const {
  const size_t levels = static_cast<size_t>(horizon) + 2;
  if (obs_enc.size() != levels || joint.size() != levels || marginal.size() != levels ||
      parent.size() != levels || emb_action.size() != levels || cell.size() != levels) {
    throw MissingMatrix("MatrixBundle: incomplete level structure");
  }
  for (int t = 0; t <= horizon + 1; ++t) {
    if (num_obs(t) == 0) throw MissingMatrix("MatrixBundle: no observations at t=" + std::to_string(t));
    for (double v : joint[t].d) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw MissingMatrix("MatrixBundle: invalid joint mass at t=" + std::to_string(t));
      }
    }
  }
}

ConditionalMatrix MatrixBundle::cond_y_given_prev(int t, int u) const {
  if (t < 1 || t > horizon + 1) throw EpochOutOfRange("cond_y_given_prev: t out of range");
  const bool terminal = (t == horizon + 1);
  const int joint_col = terminal ? 0 : u;
  if (!terminal && (u < 0 || u >= num_actions)) {
    throw UnsupportedAction("cond_y_given_prev: invalid action " + std::to_string(u));
  }
  ConditionalMatrix m;
  m.values = Mat(num_obs(t), num_obs(t - 1));
  for (int y = 0; y < num_obs(t); ++y) m.row_labels.push_back(obs_label(t, y));
  for (int p = 0; p < num_obs(t - 1); ++p) m.col_labels.push_back(obs_label(t - 1, p));
  m.context = "P(Y_" + std::to_string(t) + "|Y_" + std::to_string(t - 1) +
              (terminal ? ")" : (",u=" + std::to_string(u) + ")"));
  for (int y = 0; y < num_obs(t); ++y) {
    const int p = parent[t][y];
    const double denom = cell[t].at(p, joint_col);
    if (denom <= 0.0) continue;  // deficient column, flagged in empty_cell_notes
    m.values.at(y, p) = joint[t].at(y, joint_col) / denom;
  }
  return m;
}

ConditionalMatrix MatrixBundle::joint_two_step(int t, int y_prev, int u_prev) const {
  if (t < 1 || t > horizon + 1) throw EpochOutOfRange("joint_two_step: t out of range");
  ConditionalMatrix m;
  const int prev_levels = (t >= 2) ? num_obs(t - 2) : 1;  // level -1 is the y_{-1} token
  m.values = Mat(num_obs(t), prev_levels);
  for (int y = 0; y < num_obs(t); ++y) m.row_labels.push_back(obs_label(t, y));
  if (t >= 2) {
    for (int g = 0; g < prev_levels; ++g) m.col_labels.push_back(obs_label(t - 2, g));
  } else {
    m.col_labels.push_back("y_-1");
  }
  m.context = "P(Y_" + std::to_string(t) + ",y_" + std::to_string(t - 1) + "=" +
              std::to_string(y_prev) + "|Y_" + std::to_string(t - 2) + ",u=" +
              std::to_string(u_prev) + ")";
  const double denom = (t >= 2) ? cell[t - 1].at(parent[t - 1][y_prev], u_prev) : cell0[u_prev];
  if (denom <= 0.0) {
    throw UnsupportedAction("joint_two_step: conditioning cell has zero probability at t=" +
                            std::to_string(t - 1) + ", u=" + std::to_string(u_prev));
  }
  const int gcol = (t >= 2) ? parent[t - 1][y_prev] : 0;
  for (int y = 0; y < num_obs(t); ++y) {
    if (parent[t][y] != y_prev) continue;
    if (emb_action[t][y] != u_prev) continue;
    m.values.at(y, gcol) = marginal[t][y] / denom;
  }
  return m;
}

ConditionalMatrix MatrixBundle::cond_y0_given_u(int u) const {
  if (u < 0 || u >= num_actions) throw UnsupportedAction("cond_y0_given_u: invalid action");
  if (cell0[u] <= 0.0) {
    throw UnsupportedAction("cond_y0_given_u: action " + std::to_string(u) +
                            " has zero probability at t=0");
  }
  ConditionalMatrix m;
  m.values = Mat(num_obs(0), 1);
  for (int y = 0; y < num_obs(0); ++y) {
    m.row_labels.push_back(obs_label(0, y));
    m.values.at(y, 0) = joint[0].at(y, u) / cell0[u];
  }
  m.col_labels.push_back("y_-1");
  m.context = "P(Y_0|u=" + std::to_string(u) + ",Y_-1)";
  return m;
}

ConditionalMatrix MatrixBundle::marginal_y0() const {
  ConditionalMatrix m;
  m.values = Mat(num_obs(0), 1);
  for (int y = 0; y < num_obs(0); ++y) {
    m.row_labels.push_back(obs_label(0, y));
    m.values.at(y, 0) = marginal[0][y];
  }
  m.col_labels.push_back("1");
  m.context = "P(Y_0)";
  return m;
}

// ---------------------------------------------------------------------------
// estimate_matrices
// ---------------------------------------------------------------------------

ControlStrategy strategy_from_meta(const MetaPolicy& meta, const MatrixBundle& bundle) {
  ControlStrategy g;
  g.horizon = bundle.horizon;
  g.num_actions = bundle.num_actions;
  g.descriptor = meta.descriptor;
  g.rows.resize(bundle.horizon + 1);
  for (int t = 0; t <= bundle.horizon; ++t) {
    for (const auto& enc : bundle.obs_enc[t]) {
      InfoVector info;
      for (size_t base = 1; base + 5 <= enc.size(); base += 5) {
        info.rounds.push_back(
            RoundRecord{enc[base], enc[base + 1], enc[base + 2], enc[base + 3], enc[base + 4]});
      }
      std::vector<double> row;
      try {
        row = meta.probs(info, enc.front());
      } catch (const UnindexedContext& e) {
        throw UndefinedOnReachableObservation(std::string("strategy_from_meta: ") + e.what());
      }
      g.rows[t].emplace(enc, std::move(row));
    }
  }
  return g;
}

MatrixBundle estimate_matrices(const Dataset& dataset, const EnvironmentSpec& env) {
  if (dataset.records.empty()) throw DimensionMismatch("estimate_matrices: empty dataset");
  const int T = static_cast<int>(dataset.records.front().rounds.size()) - 1;
  if (T != env.horizon) {
    throw DimensionMismatch("estimate_matrices: dataset horizon " + std::to_string(T) +
                            " != environment horizon " + std::to_string(env.horizon));
  }
  for (const auto& rec : dataset.records) {
    if (static_cast<int>(rec.rounds.size()) != T + 1) {
      throw DimensionMismatch("estimate_matrices: ragged record lengths");
    }
  }

  MatrixBundle b;
  b.provenance = MatrixBundle::Provenance::kSample;
  b.sample_n = dataset.records.size();
  b.seed = dataset.seed;
  b.horizon = T;
  b.num_actions = env.num_policies();
  b.sender_values = env.rewards.sender_values;
  b.obs_enc.resize(T + 2);
  b.obs_index.resize(T + 2);
  b.joint.resize(T + 2);
  b.marginal.resize(T + 2);
  b.parent.resize(T + 2);
  b.emb_action.resize(T + 2);
  b.reward_entering.resize(T + 2);
  b.cell.resize(T + 2);

  // Count (y_t, u_t) occurrences, keyed by the observation encoding
  // [s_t, (s,u,q,a,r)*t] (s = -1 at the final level).
  std::vector<std::map<std::vector<int>, std::vector<double>>> counts(T + 2);
  const double unit = 1.0 / static_cast<double>(dataset.records.size());
  for (const auto& rec : dataset.records) {
    std::vector<int> flat;
    for (int t = 0; t <= T + 1; ++t) {
      std::vector<int> enc;
      enc.push_back(t <= T ? rec.rounds[t].s : -1);
      enc.insert(enc.end(), flat.begin(), flat.end());
      auto& row = counts[t][std::move(enc)];
      if (t <= T) {
        row.resize(static_cast<size_t>(b.num_actions), 0.0);
        row[rec.rounds[t].u] += unit;
        const ObservableRound& r = rec.rounds[t];
        flat.insert(flat.end(),
                    {r.s, r.u, r.q, r.a, env.rewards.receiver_value_index(r.receiver_reward)});
      } else {
        row.resize(1, 0.0);
        row[0] += unit;
      }
    }
  }

  for (int t = 0; t <= T + 1; ++t) {
    const int width = (t <= T) ? b.num_actions : 1;
    b.joint[t] = Mat(static_cast<int>(counts[t].size()), width);
    for (auto& [enc, row] : counts[t]) {
      const int local = static_cast<int>(b.obs_enc[t].size());
      b.obs_index[t].emplace(enc, local);
      b.obs_enc[t].push_back(enc);
      double total = 0.0;
      for (int u = 0; u < width; ++u) {
        b.joint[t].at(local, u) = row[u];
        total += row[u];
      }
      b.marginal[t].push_back(total);
      if (t >= 1) {
        // Parent encoding: drop the last round's record, restore its state.
        const auto& e = b.obs_enc[t][local];
        const size_t rec_base = e.size() - 5;
        std::vector<int> parent_enc;
        parent_enc.push_back(e[rec_base]);  // s_{t-1}
        parent_enc.insert(parent_enc.end(), e.begin() + 1, e.begin() + rec_base);
        b.parent[t].push_back(b.obs_index[t - 1].at(parent_enc));
        b.emb_action[t].push_back(e[rec_base + 1]);
        b.reward_entering[t].push_back(env.rewards.sender.at(e[rec_base], e[rec_base + 3]));
      }
    }
  }

  b.cell0.assign(static_cast<size_t>(b.num_actions), 0.0);
  for (int y = 0; y < b.num_obs(0); ++y) {
    for (int u = 0; u < b.num_actions; ++u) b.cell0[u] += b.joint[0].at(y, u);
  }
  for (int u = 0; u < b.num_actions; ++u) {
    if (b.cell0[u] <= 0.0) {
      b.empty_cell_notes.push_back("cell (y_-1, u_0=" + std::to_string(u) + ") empty");
    }
  }
  for (int t = 1; t <= T + 1; ++t) {
    const int width = (t <= T) ? b.num_actions : 1;
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

// ---------------------------------------------------------------------------
// Weight matrices
// ---------------------------------------------------------------------------

namespace {

// Conditional P(y_t | parent(y_t), u_t); u_t = -1 selects the terminal level
// without an action.
double cond_entry(const MatrixBundle& b, int t, int y, int u) {
  const bool terminal = (u < 0);
  const int col = terminal ? 0 : u;
  const double denom = b.cell[t].at(b.parent[t][y], col);
  if (denom <= 0.0) {
    throw UnsupportedAction("weight chain: empty conditioning cell at t=" + std::to_string(t) +
                            ", u=" + std::to_string(u));
  }
  return b.joint[t].at(y, col) / denom;
}

// Entry of P(y_t, y_{t-1} | y_{t-2}, u_{t-1}) at the realized path.
double two_step_entry(const MatrixBundle& b, int t, int y) {
  const int u_prev = b.emb_action[t][y];
  const double denom =
      (t >= 2) ? b.cell[t - 1].at(b.parent[t - 1][b.parent[t][y]], u_prev) : b.cell0[u_prev];
  if (denom <= 0.0) {
    throw UnsupportedAction("weight chain: empty two-step cell at t=" + std::to_string(t - 1));
  }
  return b.marginal[t][y] / denom;
}

}  // namespace

WeightMatrix weight_matrix(const MatrixBundle& b, int t, int y, int u_t, WeightConvention conv,
                           double rel_threshold) {
  if (t < 0 || t > b.horizon + 1) throw EpochOutOfRange("weight_matrix: t out of range");
  WeightMatrix w;
  w.t = t;
  w.context = "tau^o_" + std::to_string(t) + ": y=" + b.obs_label(t, y) +
              " u=" + std::to_string(u_t);
  if (t == 0) {
    // W_0 = pinv(P(Y_0|u_0,Y_-1)) * P(Y_0), contracted to the realized y_0.
    if (conv == WeightConvention::kPathRestricted) {
      if (b.cell0[u_t] <= 0.0) throw UnsupportedAction("weight_matrix: action unsupported at t=0");
      const double d = b.joint[0].at(y, u_t) / b.cell0[u_t];
      if (d <= 0.0) throw UnsupportedAction("weight_matrix: zero P(y_0|u_0)");
      w.scalar = b.marginal[0][y] / d;
    } else {
      const Mat inv = pinv(b.cond_y0_given_u(u_t).values, rel_threshold);
      w.scalar = matmul(inv, b.marginal_y0().values).at(0, 0);
    }
    w.values = Mat(1, 1);
    w.values.at(0, 0) = w.scalar;
    w.row_anchor = 0;
    w.col_anchor = 0;
    return w;
  }
  const int row_anchor = b.parent[t][y];
  const int col_anchor = (t >= 2) ? b.parent[t - 1][row_anchor] : 0;
  if (conv == WeightConvention::kPathRestricted) {
    const double d = cond_entry(b, t, y, u_t);
    const double g = two_step_entry(b, t, y);
    w.scalar = g / d;
    w.values = Mat(b.num_obs(t - 1), (t >= 2) ? b.num_obs(t - 2) : 1);
    w.values.at(row_anchor, col_anchor) = w.scalar;
  } else {
    // Literal reading: free row index over the whole level-t space.
    const ConditionalMatrix d_full = b.cond_y_given_prev(t, u_t);
    const ConditionalMatrix g_full = b.joint_two_step(t, row_anchor, b.emb_action[t][y]);
    w.values = matmul(pinv(d_full.values, rel_threshold), g_full.values);
    w.scalar = w.values.at(row_anchor, col_anchor);
  }
  w.row_anchor = row_anchor;
  w.col_anchor = col_anchor;
  return w;
}

// ---------------------------------------------------------------------------
// Theorem-2 reward distribution and value
// ---------------------------------------------------------------------------

namespace {

std::vector<int> ancestor_chain(const MatrixBundle& b, int level, int y) {
  std::vector<int> anc(static_cast<size_t>(level) + 1);
  anc[level] = y;
  for (int k = level; k >= 1; --k) anc[k - 1] = b.parent[k][anc[k]];
  return anc;
}

// The weight-chain scalar for one support trajectory: the product of
// W_{t+1} ... W_0 along the realized path, with u_next the action at the head
// level (-1 selects the terminal variant).
double chain_scalar(const MatrixBundle& b, const std::vector<int>& anc, int level, int u_next) {
  double w = weight_matrix(b, level, anc[level], u_next).scalar;
  for (int k = level - 1; k >= 1; --k) {
    w *= weight_matrix(b, k, anc[k], b.emb_action[k + 1][anc[k + 1]]).scalar;
  }
  w *= weight_matrix(b, 0, anc[0], b.emb_action[1][anc[1]]).scalar;
  return w;
}

}  // namespace

RewardDistribution theorem2_reward_dist(const MatrixBundle& b, const ControlStrategy& eval,
                                        int t, Theorem2Diagnostics* diag) {
  if (t < 0 || t > b.horizon) {
    throw EpochOutOfRange("theorem2_reward_dist: t=" + std::to_string(t));
  }
  if (static_cast<int>(b.obs_enc.size()) < t + 2) {
    throw MissingMatrix("theorem2_reward_dist: bundle incomplete through t+1");
  }
  const int level = t + 1;
  RewardDistribution rd;
  rd.values = b.sender_values;
  std::vector<double> raw(rd.values.size(), 0.0);
  Theorem2Diagnostics local;

  for (int y = 0; y < b.num_obs(level); ++y) {
    const std::vector<int> anc = ancestor_chain(b, level, y);
    // Strategy factors for the embedded actions u_0..u_t.
    double pe = 1.0;
    for (int k = 0; k <= t; ++k) {
      pe *= eval.action_prob(k, b.obs_enc[k][anc[k]], b.emb_action[k + 1][anc[k + 1]]);
    }
    if (pe == 0.0) continue;
    const int r_bin = [&] {
      const double r = b.reward_entering[level][y];
      auto it = std::lower_bound(rd.values.begin(), rd.values.end(), r);
      return static_cast<int>(it - rd.values.begin());
    }();

    if (t < b.horizon) {
      // Reward matrix P^b(r_t, y_{t+1} | u_{t+1}, Y_t) at the realized column,
      // chained with W_{t+1} .. W_0; summed over the head action u_{t+1}.
      for (int u_next = 0; u_next < b.num_actions; ++u_next) {
        if (b.joint[level].at(y, u_next) <= 0.0) continue;
        const double pe_head = eval.action_prob(level, b.obs_enc[level][y], u_next);
        if (pe_head == 0.0) continue;
        const double rrow = cond_entry(b, level, y, u_next);
        const double contribution = pe * pe_head * rrow * chain_scalar(b, anc, level, u_next);
        raw[r_bin] += contribution;
        ++local.support_paths;
      }
    } else {
      // t = T: no terminal control exists; the head factor degenerates to the
      // unconditioned P^b(Y_{T+1}|Y_T) inside the terminal weight variant.
      const double rrow = cond_entry(b, level, y, -1);
      const double contribution = pe * rrow * chain_scalar(b, anc, level, -1);
      raw[r_bin] += contribution;
      ++local.support_paths;
    }
  }

  for (double v : raw) local.pre_normalization_mass += v;
  double clipped = 0.0;
  for (double& v : raw) {
    if (v < 0.0) {
      clipped += -v;
      v = 0.0;
    }
    v = std::min(v, 1.0);
  }
  local.clipped_mass = clipped;
  const double mass = std::accumulate(raw.begin(), raw.end(), 0.0);
  if (mass > 0.0) {
    for (double& v : raw) v /= mass;
  }
  // Mass missing from the summation support: sampling noise stays well under
  // this threshold, genuine truncation (evaluation strategies reaching where
  // the behavioral data never went) does not.
  if (std::fabs(local.pre_normalization_mass - 1.0) > 0.01) {
    local.incomplete_support = true;
    std::ostringstream os;
    os << "support truncation: estimated missing evaluation mass "
       << (1.0 - local.pre_normalization_mass);
    local.notes.push_back(os.str());
  }
  rd.probs = std::move(raw);
  if (diag) *diag = std::move(local);
  return rd;
}

OpeEstimate ope_value(const MatrixBundle& b, const ControlStrategy& eval) {
  OpeEstimate est;
  est.value_floor = (b.horizon + 1) * b.sender_values.front();
  est.value_ceiling = (b.horizon + 1) * b.sender_values.back();
  for (int t = 0; t <= b.horizon; ++t) {
    Theorem2Diagnostics diag;
    RewardDistribution rd = theorem2_reward_dist(b, eval, t, &diag);
    est.value += rd.mean();
    est.per_epoch.push_back(std::move(rd));
    est.diagnostics.push_back(std::move(diag));
  }
  return est;
}

// ---------------------------------------------------------------------------
// Rank diagnostics
// ---------------------------------------------------------------------------

BundleRankReport rank_report(const MatrixBundle& b, const LiftedPomdp* pomdp,
                             double rel_threshold) {
  BundleRankReport report;
  report.empty_cells = b.empty_cell_notes;
  bool all_full_rank = true;
  for (int t = 1; t <= b.horizon + 1; ++t) {
    const int actions = (t <= b.horizon) ? b.num_actions : 1;
    for (int u = 0; u < actions; ++u) {
      const int uu = (t <= b.horizon) ? u : -1;
      ConditionalMatrix cm = b.cond_y_given_prev(t, uu);
      RankDiagnostics diag;
      pinv(cm.values, rel_threshold, &diag);
      diag.pass = (diag.effective_rank == cm.values.cols);
      if (!diag.pass) {
        all_full_rank = false;
        diag.note = "column rank " + std::to_string(diag.effective_rank) + " < " +
                    std::to_string(cm.values.cols);
      }
      report.matrix_names.push_back(cm.context);
      report.per_matrix.push_back(std::move(diag));
    }
  }
  report.pass = all_full_rank && b.empty_cell_notes.empty();
  if (pomdp) {
    std::ostringstream os;
    os << "literal square-invertibility profile:";
    for (int t = 1; t <= pomdp->horizon; ++t) {
      size_t max_mult = 0;
      std::vector<size_t> mult(pomdp->observations[t].size(), 0);
      for (int oi : pomdp->obs_of_state[t]) max_mult = std::max(max_mult, ++mult[oi]);
      os << " t=" << t << ": |X_t|=" << pomdp->states[t].size()
         << " |Y_t|=" << pomdp->observations[t].size() << " max-hidden-multiplicity=" << max_mult
         << ";";
    }
    os << " coverage:";
    for (int t = 0; t <= b.horizon + 1; ++t) {
      os << " t=" << t << ": observed " << b.num_obs(t) << " of "
         << pomdp->observations[t].size() << " reachable;";
    }
    report.dimension_note = os.str();
  }
  return report;
}

// ---------------------------------------------------------------------------
// Importance-sampling baselines
// ---------------------------------------------------------------------------

namespace {

InfoVector info_of_record(const ObservableTrajectory& rec, const EnvironmentSpec& env, int upto) {
  InfoVector info;
  for (int i = 0; i < upto; ++i) {
    const ObservableRound& r = rec.rounds[i];
    info.rounds.push_back(
        RoundRecord{r.s, r.u, r.q, r.a, env.rewards.receiver_value_index(r.receiver_reward)});
  }
  return info;
}

IsEstimate summarize(const std::vector<double>& weighted_returns) {
  IsEstimate est;
  est.n = weighted_returns.size();
  double mean = 0.0;
  for (double v : weighted_returns) mean += v;
  mean /= static_cast<double>(est.n);
  double var = 0.0;
  for (double v : weighted_returns) var += (v - mean) * (v - mean);
  var /= static_cast<double>(est.n > 1 ? est.n - 1 : 1);
  est.value = mean;
  est.standard_error = std::sqrt(var / static_cast<double>(est.n));
  return est;
}

}  // namespace

IsEstimate importance_sampling_value(const Dataset& dataset, const EnvironmentSpec& env,
                                     const MetaPolicy& eval, const MetaPolicy& behavioral) {
  std::vector<double> v;
  v.reserve(dataset.records.size());
  for (const auto& rec : dataset.records) {
    double w = 1.0;
    for (size_t i = 0; i < rec.rounds.size(); ++i) {
      const InfoVector info = info_of_record(rec, env, static_cast<int>(i));
      const ObservableRound& r = rec.rounds[i];
      const double pb = behavioral.probs(info, r.s)[r.u];
      if (pb <= 0.0) {
        throw UnsupportedAction("importance_sampling_value: logged action outside behavioral support");
      }
      w *= eval.probs(info, r.s)[r.u] / pb;
    }
    v.push_back(w * rec.sender_return());
  }
  return summarize(v);
}

IsEstimate estimated_propensity_is_value(const Dataset& dataset, const EnvironmentSpec& env,
                                         const MetaPolicy& eval) {
  const MatrixBundle b = estimate_matrices(dataset, env);
  std::vector<double> v;
  v.reserve(dataset.records.size());
  for (const auto& rec : dataset.records) {
    double w = 1.0;
    std::vector<int> flat;
    for (size_t i = 0; i < rec.rounds.size(); ++i) {
      const ObservableRound& r = rec.rounds[i];
      std::vector<int> enc;
      enc.push_back(r.s);
      enc.insert(enc.end(), flat.begin(), flat.end());
      const int t = static_cast<int>(i);
      const int yi = b.obs_index[t].at(enc);
      const double propensity = b.joint[t].at(yi, r.u) / b.marginal[t][yi];
      const InfoVector info = info_of_record(rec, env, t);
      w *= eval.probs(info, r.s)[r.u] / propensity;
      flat.insert(flat.end(),
                  {r.s, r.u, r.q, r.a, env.rewards.receiver_value_index(r.receiver_reward)});
    }
    v.push_back(w * rec.sender_return());
  }
  return summarize(v);
}

}  // namespace bplab

