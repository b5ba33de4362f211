// Batch front door: environment configuration, dataset persistence,
// experiment orchestration (simulate -> estimate -> compare -> search) and
// report emission.
//
//   bplab solve-bp         --config <path> [--out <dir>] [--seed <n>]
//   bplab gen-data         --config <path> [--out <dir>] [--seed <n>]
//   bplab evaluate         --config <path> [--out <dir>] [--seed <n>]
//   bplab check-identities --config <path> [--out <dir>] [--seed <n>]
//   bplab search-policy    --config <path> [--out <dir>] [--seed <n>]
//
// Exit codes: 0 success, 2 config/parse error, 3 rank-condition failure,
// 4 identity failure, 5 state-space guard abort, 1 anything else.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "bplab/env_io.hpp"
#include "bplab/exact_oracle.hpp"
#include "bplab/kernels.hpp"
#include "bplab/proximal_ope.hpp"

namespace {

using namespace bplab;
using bplab::io::json;

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitRank = 3;
constexpr int kExitIdentity = 4;
constexpr int kExitSizeGuard = 5;

struct RunContext {
  io::ExperimentConfig config;
  EnvironmentSpec env;
  uint64_t env_hash = 0;
  std::filesystem::path run_dir;
};

std::filesystem::path make_run_dir(const std::string& base) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "run-%Y%m%d-%H%M%S", std::localtime(&tt));
  std::filesystem::path dir = std::filesystem::path(base) / stamp;
  // Never silently overwrite an earlier run.
  for (int k = 1; std::filesystem::exists(dir); ++k) {
    dir = std::filesystem::path(base) / (std::string(stamp) + "-" + std::to_string(k));
  }
  std::filesystem::create_directories(dir);
  return dir;
}

RunContext load_context(const std::string& config_path, const std::string& out_override,
                        std::optional<uint64_t> seed_override) {
  RunContext ctx;
  ctx.config = io::load_config(config_path);
  if (!out_override.empty()) ctx.config.out = out_override;
  if (seed_override) ctx.config.seed = *seed_override;
  ctx.env = io::load_environment(ctx.config.environment_path);
  ctx.env_hash = io::env_hash(ctx.env);
  ctx.run_dir = make_run_dir(ctx.config.out);
  return ctx;
}

json base_summary(const RunContext& ctx, const std::string& command) {
  json j;
  j["run"]["command"] = command;
  j["run"]["environment"] = ctx.config.environment_path;
  j["run"]["environment_name"] = ctx.env.name;
  j["run"]["environment_hash"] = hash_hex(ctx.env_hash);
  j["run"]["seed"] = ctx.config.seed;
  j["run"]["mode"] = ctx.config.mode;
  j["run"]["simd"] = kernels::isa_name(kernels::active_isa());
  return j;
}

void finish(const RunContext& ctx, const json& summary) {
  io::write_text((ctx.run_dir / "summary.kvtree").string(), io::dump_kvtree(summary));
  std::cout << "report: " << (ctx.run_dir / "summary.kvtree").string() << "\n";
}

double wall_seconds(const std::chrono::steady_clock::time_point& from) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - from).count();
}

// ---------------------------------------------------------------------------

int cmd_solve_bp(const RunContext& ctx) {
  json summary = base_summary(ctx, "solve-bp");
  const auto [idx, value] =
      solve_bp(ctx.env.policies, ctx.env.prior, ctx.env.rewards, ctx.env.tie_break);
  const std::string name = ctx.env.policies[idx].name;
  std::cout << "best signaling policy: " << name << " (index " << idx
            << "), J = " << io::format_g17(value) << "\n";
  summary["solve_bp"]["best_policy"] = name;
  summary["solve_bp"]["best_index"] = idx;
  summary["solve_bp"]["value"] = value;
  json all = json::object();
  for (const auto& policy : ctx.env.policies) {
    all[policy.name] = policy_value(policy, ctx.env.prior, ctx.env.rewards, ctx.env.tie_break);
  }
  summary["solve_bp"]["policy_values"] = all;
  finish(ctx, summary);
  return kExitOk;
}

int cmd_gen_data(const RunContext& ctx) {
  json summary = base_summary(ctx, "gen-data");
  const MetaPolicy behavioral = io::meta_policy_from_json(ctx.config.behavioral, ctx.env);
  if (!has_full_support(behavioral)) {
    summary["warnings"]["full_support"] = "behavioral strategy has zero-probability policies";
  }
  Dataset ds = generate_dataset(ctx.env, behavioral, ctx.config.n, ctx.config.seed);
  ds.env_hash = ctx.env_hash;
  const std::filesystem::path path = ctx.run_dir / "dataset.txt";
  io::save_dataset(ds, ctx.env, path.string());
  std::cout << "dataset: " << path.string() << " (" << ds.size() << " records)\n";
  summary["dataset"]["path"] = path.string();
  summary["dataset"]["records"] = ds.size();
  summary["dataset"]["strategy"] = ds.strategy_descriptor;
  finish(ctx, summary);
  return kExitOk;
}

struct OracleSide {
  LiftedPomdp pomdp;
  bool feasible = false;
};

OracleSide try_build_pomdp(const EnvironmentSpec& env) {
  OracleSide side;
  try {
    side.pomdp = build_pomdp(env);
    side.feasible = true;
  } catch (const StateSpaceTooLarge& e) {
    std::cerr << "note: enumeration oracle disabled, " << e.what() << "\n";
  }
  return side;
}

void dump_bundle_matrices(const MatrixBundle& bundle, const std::filesystem::path& dir) {
  for (int t = 1; t <= bundle.horizon + 1; ++t) {
    const int actions = (t <= bundle.horizon) ? bundle.num_actions : 1;
    for (int u = 0; u < actions; ++u) {
      const int uu = (t <= bundle.horizon) ? u : -1;
      const ConditionalMatrix cm = bundle.cond_y_given_prev(t, uu);
      io::write_csv(cm, (dir / ("P_Y" + std::to_string(t) + "_given_Y" + std::to_string(t - 1) +
                                "_u" + std::to_string(uu) + ".csv"))
                            .string());
    }
  }
  for (int u = 0; u < bundle.num_actions; ++u) {
    try {
      io::write_csv(bundle.cond_y0_given_u(u),
                    (dir / ("P_Y0_given_u" + std::to_string(u) + ".csv")).string());
    } catch (const UnsupportedAction&) {
      // empty conditioning cell; visible in the rank report
    }
  }
  io::write_csv(bundle.marginal_y0(), (dir / "P_Y0.csv").string());
}

int cmd_evaluate(const RunContext& ctx) {
  json summary = base_summary(ctx, "evaluate");
  const MetaPolicy behavioral = io::meta_policy_from_json(ctx.config.behavioral, ctx.env);
  std::vector<MetaPolicy> evals;
  for (const json& desc : ctx.config.evaluation) {
    evals.push_back(io::meta_policy_from_json(desc, ctx.env));
  }
  if (evals.empty()) throw ParseError("evaluate: config lists no evaluation strategies");

  const OracleSide oracle = try_build_pomdp(ctx.env);
  const bool sample_mode = ctx.config.mode == "sample";
  if (!oracle.feasible && !sample_mode) {
    throw StateSpaceTooLarge("evaluate: population mode requires the lifted model");
  }

  MatrixBundle bundle;
  if (sample_mode) {
    Dataset ds;
    if (!ctx.config.dataset_path.empty()) {
      ds = io::load_dataset(ctx.config.dataset_path, ctx.env);
      summary["dataset"]["path"] = ctx.config.dataset_path;
    } else {
      ds = generate_dataset(ctx.env, behavioral, ctx.config.n, ctx.config.seed);
      ds.env_hash = ctx.env_hash;
      const std::filesystem::path path = ctx.run_dir / "dataset.txt";
      io::save_dataset(ds, ctx.env, path.string());
      summary["dataset"]["path"] = path.string();
    }
    summary["dataset"]["records"] = ds.size();
    bundle = estimate_matrices(ds, ctx.env);
  } else {
    bundle = population_matrices(oracle.pomdp, lift_meta_policy(behavioral, oracle.pomdp));
  }

  const BundleRankReport rank = rank_report(bundle, oracle.feasible ? &oracle.pomdp : nullptr);
  summary["rank"]["pass"] = rank.pass;
  summary["rank"]["empty_cells"] = rank.empty_cells.size();
  if (!rank.dimension_note.empty()) summary["rank"]["dimensions"] = rank.dimension_note;
  dump_bundle_matrices(bundle, ctx.run_dir / "matrices");

  std::ofstream rows((ctx.run_dir / "rows.csv").string());
  rows << "strategy,J_ope,J_exact,J_monte_carlo,max_tv_reward_dist,rank_pass,wall_seconds\n";
  json per_strategy = json::object();
  for (const MetaPolicy& eval : evals) {
    const auto started = std::chrono::steady_clock::now();
    json row;
    double j_ope = 0.0;
    bool ope_ok = true;
    std::string max_tv = "n/a";
    try {
      const ControlStrategy ge = oracle.feasible ? lift_meta_policy(eval, oracle.pomdp)
                                                 : strategy_from_meta(eval, bundle);
      const OpeEstimate est = ope_value(bundle, ge);
      j_ope = est.value;
      row["J_ope"] = est.value;
      for (int t = 0; t <= bundle.horizon; ++t) {
        row["pre_normalization_mass"]["t" + std::to_string(t)] =
            est.diagnostics[t].pre_normalization_mass;
      }
      if (oracle.feasible) {
        const TrajectoryDistribution dist = exact_traj_dist(oracle.pomdp, ge);
        double tv = 0.0;
        for (int t = 0; t <= bundle.horizon; ++t) {
          tv = std::max(tv, total_variation(est.per_epoch[t].probs,
                                            exact_reward_dist(oracle.pomdp, dist, t).probs));
        }
        max_tv = io::format_g17(tv);
        row["max_tv_reward_dist"] = tv;
      }
    } catch (const UnsupportedAction& e) {
      ope_ok = false;
      row["error"] = e.what();
      std::cerr << "rank failure for strategy '" << eval.descriptor << "': " << e.what() << "\n";
    }
    std::string j_exact = "n/a", j_mc = "n/a";
    if (oracle.feasible) {
      const ControlStrategy ge = lift_meta_policy(eval, oracle.pomdp);
      const double exact = exact_value(oracle.pomdp, ge);
      const double mc = monte_carlo_value(ctx.env, eval, std::max<uint64_t>(ctx.config.n, 1000),
                                          derive_seed(ctx.config.seed, 0x4d43));
      j_exact = io::format_g17(exact);
      j_mc = io::format_g17(mc);
      row["J_exact"] = exact;
      row["J_monte_carlo"] = mc;
    }
    const double secs = wall_seconds(started);
    rows << eval.descriptor << "," << (ope_ok ? io::format_g17(j_ope) : "n/a") << "," << j_exact
         << "," << j_mc << "," << max_tv << "," << (rank.pass ? "1" : "0") << ","
         << io::format_g17(secs) << "\n";
    row["wall_seconds"] = secs;
    per_strategy[eval.descriptor] = row;
  }
  summary["strategies"] = per_strategy;
  finish(ctx, summary);
  return rank.pass ? kExitOk : kExitRank;
}

int cmd_check_identities(const RunContext& ctx) {
  json summary = base_summary(ctx, "check-identities");
  const OracleSide oracle = try_build_pomdp(ctx.env);
  if (!oracle.feasible) {
    throw StateSpaceTooLarge("check-identities: the lifted model is required");
  }
  const MetaPolicy behavioral = io::meta_policy_from_json(ctx.config.behavioral, ctx.env);
  const ControlStrategy gb = lift_meta_policy(behavioral, oracle.pomdp);
  const IdentityReport rep = appendix_identity_check(oracle.pomdp, gb);
  json items = json::object();
  for (const auto& item : rep.items) {
    json j;
    j["max_abs_dev"] = item.max_abs_dev;
    j["tolerance"] = item.tolerance;
    j["verified"] = item.verified;
    if (item.unverifiable) j["unverifiable"] = true;
    if (item.informational) j["informational"] = true;
    if (!item.note.empty()) j["note"] = item.note;
    items[item.name] = j;
    const char* tag = item.informational ? "INFO"
                      : item.verified    ? "PASS"
                      : item.unverifiable ? "SKIP"
                                          : "FAIL";
    std::cout << tag << " " << item.name << " (dev " << item.max_abs_dev << ")\n";
  }
  summary["identities"] = items;
  summary["identities_rank_ok"] = rep.rank_ok;
  summary["convention"] = rep.convention_finding;
  json notes = json::array();
  for (const auto& n : rep.rank_notes) notes.push_back(n);
  summary["rank_notes"] = notes;
  std::cout << rep.convention_finding << "\n";
  finish(ctx, summary);
  if (!rep.rank_ok) return kExitRank;
  return rep.all_verified() ? kExitOk : kExitIdentity;
}

int cmd_search_policy(const RunContext& ctx) {
  json summary = base_summary(ctx, "search-policy");
  const MetaPolicy behavioral = io::meta_policy_from_json(ctx.config.behavioral, ctx.env);
  std::string family = "last_action_det";
  if (!ctx.config.search.is_null() && ctx.config.search.contains("family")) {
    family = ctx.config.search.at("family").get<std::string>();
  }
  std::vector<MetaPolicy> candidates;
  if (family == "last_action_det") {
    candidates = enumerate_last_action_family(ctx.env);
  } else if (family == "explicit") {
    for (const json& m : ctx.config.search.at("members")) {
      candidates.push_back(io::meta_policy_from_json(m, ctx.env));
    }
  } else {
    throw ParseError("search.family: unknown family '" + family + "'");
  }

  const OracleSide oracle = try_build_pomdp(ctx.env);
  const bool sample_mode = ctx.config.mode == "sample";
  MatrixBundle bundle;
  if (sample_mode) {
    Dataset ds;
    if (!ctx.config.dataset_path.empty()) {
      ds = io::load_dataset(ctx.config.dataset_path, ctx.env);
    } else {
      ds = generate_dataset(ctx.env, behavioral, ctx.config.n, ctx.config.seed);
      ds.env_hash = ctx.env_hash;
      io::save_dataset(ds, ctx.env, (ctx.run_dir / "dataset.txt").string());
    }
    bundle = estimate_matrices(ds, ctx.env);
  } else {
    if (!oracle.feasible) {
      throw StateSpaceTooLarge("search-policy: population mode requires the lifted model");
    }
    bundle = population_matrices(oracle.pomdp, lift_meta_policy(behavioral, oracle.pomdp));
  }
  const BundleRankReport rank = rank_report(bundle, oracle.feasible ? &oracle.pomdp : nullptr);

  struct Entry {
    std::string name;
    double j_ope = 0.0;
    double j_exact = 0.0;
    bool has_exact = false;
  };
  std::vector<Entry> entries;
  for (const MetaPolicy& meta : candidates) {
    Entry e;
    e.name = meta.descriptor;
    const ControlStrategy ge = oracle.feasible ? lift_meta_policy(meta, oracle.pomdp)
                                               : strategy_from_meta(meta, bundle);
    e.j_ope = ope_value(bundle, ge).value;
    if (oracle.feasible) {
      e.j_exact = exact_value(oracle.pomdp, ge);
      e.has_exact = true;
    }
    entries.push_back(e);
  }
  std::vector<size_t> order(entries.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return entries[a].j_ope > entries[b].j_ope; });
  std::vector<size_t> exact_order = order;
  const bool has_exact = !entries.empty() && entries.front().has_exact;
  if (has_exact) {
    std::stable_sort(exact_order.begin(), exact_order.end(),
                     [&](size_t a, size_t b) { return entries[a].j_exact > entries[b].j_exact; });
  }
  auto exact_rank_of = [&](size_t idx) -> int {
    for (size_t r = 0; r < exact_order.size(); ++r) {
      if (exact_order[r] == idx) return static_cast<int>(r) + 1;
    }
    return -1;
  };

  std::ofstream rows((ctx.run_dir / "rows.csv").string());
  rows << "rank,strategy,J_ope,J_exact,exact_rank\n";
  for (size_t r = 0; r < order.size(); ++r) {
    const Entry& e = entries[order[r]];
    rows << (r + 1) << "," << e.name << "," << io::format_g17(e.j_ope) << ","
         << (e.has_exact ? io::format_g17(e.j_exact) : "n/a") << ","
         << (e.has_exact ? std::to_string(exact_rank_of(order[r])) : "n/a") << "\n";
  }
  const Entry& top = entries[order.front()];
  std::cout << "top strategy: " << top.name << " with J_ope = " << io::format_g17(top.j_ope);
  if (top.has_exact) std::cout << " (exact " << io::format_g17(top.j_exact) << ")";
  std::cout << "\n";
  summary["search"]["family"] = family;
  summary["search"]["candidates"] = candidates.size();
  summary["search"]["top_strategy"] = top.name;
  summary["search"]["top_J_ope"] = top.j_ope;
  if (top.has_exact) {
    summary["search"]["top_J_exact"] = top.j_exact;
    summary["search"]["top_exact_rank"] = exact_rank_of(order.front());
  }
  summary["rank"]["pass"] = rank.pass;
  finish(ctx, summary);
  return rank.pass ? kExitOk : kExitRank;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-space laboratory for sequential Bayesian persuasion under confounding"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  std::optional<uint64_t> seed_override;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment configuration file")->required();
    sub->add_option("--out", out_override, "output directory (overrides config)");
    sub->add_option("--seed", seed_override, "master seed (overrides config)");
  };
  CLI::App* solve = app.add_subcommand("solve-bp", "one-shot optimal signaling policy");
  CLI::App* gen = app.add_subcommand("gen-data", "generate a logged dataset");
  CLI::App* eval = app.add_subcommand("evaluate", "off-policy evaluation of strategies");
  CLI::App* check = app.add_subcommand("check-identities", "verify the estimator identity chain");
  CLI::App* search = app.add_subcommand("search-policy", "rank an enumerable meta-policy family");
  for (CLI::App* sub : {solve, gen, eval, check, search}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  try {
    const RunContext ctx = load_context(config_path, out_override, seed_override);
    if (solve->parsed()) return cmd_solve_bp(ctx);
    if (gen->parsed()) return cmd_gen_data(ctx);
    if (eval->parsed()) return cmd_evaluate(ctx);
    if (check->parsed()) return cmd_check_identities(ctx);
    if (search->parsed()) return cmd_search_policy(ctx);
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitParse;
  } catch (const StateSpaceTooLarge& e) {
    std::cerr << "state-space guard: " << e.what() << "\n";
    return kExitSizeGuard;
  } catch (const RankConditionFailed& e) {
    std::cerr << "rank condition failed: " << e.what() << "\n";
    return kExitRank;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
