#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "bplab/matrix.hpp"
#include "bplab/spp_sim.hpp"

// File formats: environment and experiment configuration documents (JSON
// key-value trees), the line-delimited dataset format, kvtree report output
// and CSV matrix dumps.

namespace bplab::io {

using json = nlohmann::json;

EnvironmentSpec environment_from_json(const json& j);
EnvironmentSpec load_environment(const std::string& path);

// Canonical serialization (kernel expanded to its full table); the content
// hash is FNV-1a over its dump.
json environment_to_json(const EnvironmentSpec& env);
uint64_t env_hash(const EnvironmentSpec& env);

// Strategy descriptors:
//   {"family":"constant",   "weights":[...]}
//   {"family":"last_action","rows":[[...initial...],[...per action...] ...]}
MetaPolicy meta_policy_from_json(const json& j, const EnvironmentSpec& env);

struct ExperimentConfig {
  std::string environment_path;
  json behavioral;
  std::vector<json> evaluation;
  uint64_t n = 1000;
  uint64_t seed = 1;
  std::string mode = "population";  // population | sample
  std::string out = "out";
  std::string dataset_path;  // optional pre-generated dataset for sample mode
  json search;               // optional search-family descriptor
};

ExperimentConfig config_from_json(const json& j, const std::string& base_dir);
ExperimentConfig load_config(const std::string& path);

// Dataset lines: one observable trajectory per line after a single header
// record; field order fixed, rewards printed with 17 significant digits.
void save_dataset(const Dataset& ds, const EnvironmentSpec& env, const std::string& path);
Dataset load_dataset(const std::string& path, const EnvironmentSpec& env);

std::string dump_kvtree(const json& j);
void write_text(const std::string& path, const std::string& content);
void write_csv(const ConditionalMatrix& m, const std::string& path);

std::string format_g17(double v);

}  // namespace bplab::io
