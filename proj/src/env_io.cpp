#include "bplab/env_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bplab::io {

namespace {

Mat mat_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw ParseError(field + ": expected a 2-d array");
  }
  Mat m(static_cast<int>(j.size()), static_cast<int>(j.front().size()));
  for (int r = 0; r < m.rows; ++r) {
    if (static_cast<int>(j[r].size()) != m.cols) throw ParseError(field + ": ragged rows");
    for (int c = 0; c < m.cols; ++c) m.at(r, c) = j[r][c].get<double>();
  }
  return m;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Fn>
auto parse_field(const std::string& field, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw ParseError(field + ": " + e.what());
  } catch (const DimensionMismatch& e) {
    throw ParseError(field + ": " + e.what());
  }
}

}  // namespace

EnvironmentSpec environment_from_json(const json& j) {
  EnvironmentSpec env;
  env.name = j.value("name", "environment");
  env.states = parse_field("states", [&] {
    return StateSpace::make(j.at("states").get<std::vector<std::string>>());
  });
  env.prior =
      parse_field("prior", [&] { return Prior::make(j.at("prior").get<std::vector<double>>()); });
  env.signals = parse_field(
      "signals", [&] { return j.at("signals").get<std::vector<std::string>>(); });
  env.rewards = parse_field("rewards", [&] {
    const json& r = j.at("rewards");
    return RewardTable::make(j.at("actions").get<std::vector<std::string>>(),
                             mat_from_json(r.at("sender"), "rewards.sender"),
                             mat_from_json(r.at("receiver"), "rewards.receiver"));
  });
  int index = 0;
  for (const json& p : j.at("policies")) {
    env.policies.push_back(parse_field("policies[" + std::to_string(index) + "]", [&] {
      return SignalingPolicy::make(env.signals,
                                   mat_from_json(p.at("table"),
                                                 "policies[" + std::to_string(index) + "].table"),
                                   p.value("name", "pi" + std::to_string(index)));
    }));
    ++index;
  }
  env.confounder = parse_field("confounder", [&] {
    const json& c = j.at("confounder");
    return ConfounderSpec::make(c.at("values").get<std::vector<std::string>>(),
                                c.at("initial_dist").get<std::vector<double>>());
  });
  env.grid = parse_field("belief_grid", [&] {
    std::vector<BeliefVector> points;
    for (const json& p : j.at("belief_grid")) {
      points.push_back(BeliefVector::make(p.get<std::vector<double>>()));
    }
    return BeliefGrid::make(std::move(points));
  });
  env.horizon = parse_field("horizon", [&] { return j.at("horizon").get<int>(); });
  const std::string tie = j.value("tie_break", "lexicographic");
  if (tie == "lexicographic") {
    env.tie_break = TieBreak::kLexicographic;
  } else if (tie == "sender_preferred") {
    env.tie_break = TieBreak::kSenderPreferred;
  } else {
    throw ParseError("tie_break: unknown value '" + tie + "'");
  }

  const json& k = j.at("belief_kernel");
  const std::string family = k.value("family", "distorted_bayes");
  if (family == "distorted_bayes") {
    env.kernel = parse_field("belief_kernel", [&] {
      auto kappa = k.at("kappa").get<std::vector<double>>();
      auto blend = k.value("blend", std::vector<double>(kappa.size(), 0.0));
      return BeliefKernel::distorted_bayes(
          env.grid, env.policies, static_cast<int>(env.rewards.receiver_values.size()),
          env.num_actions(), env.num_confounders(), kappa, blend);
    });
  } else if (family == "table") {
    env.kernel = parse_field("belief_kernel", [&] {
      BeliefKernel kernel(env.grid.size(), static_cast<int>(env.rewards.receiver_values.size()),
                          env.num_actions(), env.num_signals(), env.num_confounders(),
                          env.num_policies());
      for (const json& row : k.at("initial")) {
        KernelContext ctx{.initial = true,
                          .q = row.at("q").get<int>(),
                          .z = row.at("z").get<int>(),
                          .u = row.at("u").get<int>()};
        kernel.set_row(ctx, row.at("dist").get<std::vector<double>>());
      }
      for (const json& row : k.at("rows")) {
        KernelContext ctx{.b_prev = row.at("b_prev").get<int>(),
                          .r_prev = row.at("r_prev").get<int>(),
                          .a_prev = row.at("a_prev").get<int>(),
                          .q = row.at("q").get<int>(),
                          .z = row.at("z").get<int>(),
                          .u = row.at("u").get<int>()};
        kernel.set_row(ctx, row.at("dist").get<std::vector<double>>());
      }
      return kernel;
    });
  } else {
    throw ParseError("belief_kernel.family: unknown family '" + family + "'");
  }
  env.validate();
  return env;
}

EnvironmentSpec load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open environment file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return environment_from_json(j);
}

json environment_to_json(const EnvironmentSpec& env) {
  json j;
  j["name"] = env.name;
  j["states"] = env.states.labels;
  j["prior"] = env.prior.probs;
  j["signals"] = env.signals;
  j["actions"] = env.rewards.actions;
  j["rewards"]["sender"] = mat_to_json(env.rewards.sender);
  j["rewards"]["receiver"] = mat_to_json(env.rewards.receiver);
  for (const auto& p : env.policies) {
    j["policies"].push_back({{"name", p.name}, {"table", mat_to_json(p.table)}});
  }
  j["confounder"] = {{"values", env.confounder.values},
                     {"initial_dist", env.confounder.initial_dist}};
  for (const auto& point : env.grid.points) j["belief_grid"].push_back(point.probs);
  j["horizon"] = env.horizon;
  j["tie_break"] =
      env.tie_break == TieBreak::kLexicographic ? "lexicographic" : "sender_preferred";
  // Kernel expanded to its full table, making the hash representation-free.
  json initial = json::array();
  json rows = json::array();
  const int nr = static_cast<int>(env.rewards.receiver_values.size());
  for (int q = 0; q < env.num_signals(); ++q) {
    for (int z = 0; z < env.num_confounders(); ++z) {
      for (int u = 0; u < env.num_policies(); ++u) {
        const auto row = env.kernel.row(KernelContext{.initial = true, .q = q, .z = z, .u = u});
        initial.push_back({{"q", q},
                           {"z", z},
                           {"u", u},
                           {"dist", std::vector<double>(row.begin(), row.end())}});
        for (int b = 0; b < env.grid.size(); ++b) {
          for (int r = 0; r < nr; ++r) {
            for (int a = 0; a < env.num_actions(); ++a) {
              const auto main_row = env.kernel.row(
                  KernelContext{.b_prev = b, .r_prev = r, .a_prev = a, .q = q, .z = z, .u = u});
              rows.push_back({{"b_prev", b},
                              {"r_prev", r},
                              {"a_prev", a},
                              {"q", q},
                              {"z", z},
                              {"u", u},
                              {"dist", std::vector<double>(main_row.begin(), main_row.end())}});
            }
          }
        }
      }
    }
  }
  j["belief_kernel"] = {{"family", "table"}, {"initial", initial}, {"rows", rows}};
  return j;
}

uint64_t env_hash(const EnvironmentSpec& env) { return fnv1a64(environment_to_json(env).dump()); }

MetaPolicy meta_policy_from_json(const json& j, const EnvironmentSpec& env) {
  const std::string family = j.at("family").get<std::string>();
  const std::string name = j.value("name", family);
  if (family == "constant") {
    auto m = MetaPolicy::constant(j.at("weights").get<std::vector<double>>(), name);
    if (m.num_policies != env.num_policies()) {
      throw ParseError("strategy '" + name + "': weights width != |P|");
    }
    return m;
  }
  if (family == "last_action") {
    auto rows = j.at("rows").get<std::vector<std::vector<double>>>();
    auto m = MetaPolicy::last_action(std::move(rows), env.num_actions(), name);
    if (m.num_policies != env.num_policies()) {
      throw ParseError("strategy '" + name + "': row width != |P|");
    }
    return m;
  }
  throw ParseError("strategy family '" + family + "' unknown");
}

ExperimentConfig config_from_json(const json& j, const std::string& base_dir) {
  ExperimentConfig c;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    if (fp.is_absolute() || base_dir.empty()) return p;
    return (std::filesystem::path(base_dir) / fp).string();
  };
  c.environment_path = resolve(j.at("environment").get<std::string>());
  if (j.contains("behavioral")) c.behavioral = j.at("behavioral");
  if (j.contains("evaluation")) {
    for (const json& e : j.at("evaluation")) c.evaluation.push_back(e);
  }
  c.n = j.value("n", static_cast<uint64_t>(1000));
  c.seed = j.value("seed", static_cast<uint64_t>(1));
  c.mode = j.value("mode", "population");
  if (c.mode != "population" && c.mode != "sample") {
    throw ParseError("mode: expected 'population' or 'sample', got '" + c.mode + "'");
  }
  c.out = j.value("out", "out");
  if (j.contains("dataset")) c.dataset_path = resolve(j.at("dataset").get<std::string>());
  if (j.contains("search")) c.search = j.at("search");
  if (c.n < 1) throw ParseError("n: must be >= 1");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return config_from_json(j, std::filesystem::path(path).parent_path().string());
}

// ---------------------------------------------------------------------------
// Dataset format
// ---------------------------------------------------------------------------

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_dataset(const Dataset& ds, const EnvironmentSpec& env, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open dataset file for writing: " + path);
  out << "#bplab-dataset v1 env=" << hash_hex(ds.env_hash) << " seed=" << ds.seed
      << " n=" << ds.records.size() << " strategy=" << ds.strategy_descriptor << "\n";
  for (const auto& rec : ds.records) {
    out << "y-1=uniform";
    for (size_t i = 0; i < rec.rounds.size(); ++i) {
      const ObservableRound& r = rec.rounds[i];
      out << " s" << i << "=" << env.states.labels[r.s] << " u" << i << "=" << r.u << " q" << i
          << "=" << env.signals[r.q] << " a" << i << "=" << env.rewards.actions[r.a] << " rr" << i
          << "=" << format_g17(r.receiver_reward) << " rs" << i << "="
          << format_g17(r.sender_reward);
    }
    out << "\n";
  }
}

namespace {

std::string take_field(std::istringstream& in, const std::string& expected_key, size_t line_no) {
  std::string token;
  if (!(in >> token)) {
    throw ParseError("dataset line " + std::to_string(line_no) + ": missing field '" +
                     expected_key + "'");
  }
  const auto eq = token.find('=');
  if (eq == std::string::npos || token.substr(0, eq) != expected_key) {
    throw ParseError("dataset line " + std::to_string(line_no) + ": expected field '" +
                     expected_key + "', got '" + token + "'");
  }
  return token.substr(eq + 1);
}

int label_index(const std::vector<std::string>& labels, const std::string& label,
                const std::string& what, size_t line_no) {
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return static_cast<int>(i);
  }
  throw ParseError("dataset line " + std::to_string(line_no) + ": unknown " + what + " label '" +
                   label + "'");
}

}  // namespace

Dataset load_dataset(const std::string& path, const EnvironmentSpec& env) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path);
  std::string header;
  if (!std::getline(in, header) || header.rfind("#bplab-dataset v1 ", 0) != 0) {
    throw ParseError(path + ": missing dataset header");
  }
  Dataset ds;
  {
    std::istringstream hs(header.substr(std::string("#bplab-dataset v1 ").size()));
    const std::string env_hex = take_field(hs, "env", 0);
    ds.env_hash = std::strtoull(env_hex.c_str(), nullptr, 16);
    ds.seed = std::strtoull(take_field(hs, "seed", 0).c_str(), nullptr, 10);
    const uint64_t n = std::strtoull(take_field(hs, "n", 0).c_str(), nullptr, 10);
    std::string strategy;
    hs >> strategy;
    const auto eq = strategy.find('=');
    ds.strategy_descriptor = (eq == std::string::npos) ? strategy : strategy.substr(eq + 1);
    ds.records.reserve(n);
  }
  const uint64_t expected_hash = env_hash(env);
  if (ds.env_hash != expected_hash) {
    throw ParseError(path + ": dataset environment hash " + hash_hex(ds.env_hash) +
                     " does not match environment " + hash_hex(expected_hash));
  }
  std::string line;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (take_field(ls, "y-1", line_no) != "uniform") {
      throw ParseError("dataset line " + std::to_string(line_no) + ": bad y-1 token");
    }
    ObservableTrajectory rec;
    for (int i = 0; i <= env.horizon; ++i) {
      const std::string idx = std::to_string(i);
      ObservableRound r;
      r.s = label_index(env.states.labels, take_field(ls, "s" + idx, line_no), "state", line_no);
      r.u = std::stoi(take_field(ls, "u" + idx, line_no));
      if (r.u < 0 || r.u >= env.num_policies()) {
        throw ParseError("dataset line " + std::to_string(line_no) + ": policy index out of range");
      }
      r.q = label_index(env.signals, take_field(ls, "q" + idx, line_no), "signal", line_no);
      r.a = label_index(env.rewards.actions, take_field(ls, "a" + idx, line_no), "action", line_no);
      r.receiver_reward = std::stod(take_field(ls, "rr" + idx, line_no));
      r.sender_reward = std::stod(take_field(ls, "rs" + idx, line_no));
      if (std::fabs(r.receiver_reward - env.rewards.receiver.at(r.s, r.a)) > 1e-9 ||
          std::fabs(r.sender_reward - env.rewards.sender.at(r.s, r.a)) > 1e-9) {
        throw ParseError("dataset line " + std::to_string(line_no) +
                         ": rewards disagree with the environment tables");
      }
      rec.rounds.push_back(r);
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

void dump_kvtree_node(const json& j, std::ostream& os, int depth) {
  const std::string pad(static_cast<size_t>(depth) * 2, ' ');
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) {
      os << pad << key << ":\n";
      dump_kvtree_node(value, os, depth + 1);
    } else if (value.is_array()) {
      os << pad << key << ":";
      for (const auto& item : value) {
        os << " " << (item.is_string() ? item.get<std::string>() : item.dump());
      }
      os << "\n";
    } else if (value.is_string()) {
      os << pad << key << ": " << value.get<std::string>() << "\n";
    } else {
      os << pad << key << ": " << value.dump() << "\n";
    }
  }
}

}  // namespace

std::string dump_kvtree(const json& j) {
  std::ostringstream os;
  dump_kvtree_node(j, os, 0);
  return os.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open output file: " + path);
  out << content;
}

void write_csv(const ConditionalMatrix& m, const std::string& path) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open output file: " + path);
  out << "context," << m.context << "\n";
  out << "row\\col";
  for (const auto& c : m.col_labels) out << "," << c;
  out << "\n";
  for (int r = 0; r < m.values.rows; ++r) {
    out << m.row_labels[r];
    for (int c = 0; c < m.values.cols; ++c) out << "," << format_g17(m.values.at(r, c));
    out << "\n";
  }
}

}  // namespace bplab::io
