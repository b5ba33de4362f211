#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bplab/env_io.hpp"
#include "support/test_envs.hpp"

using namespace bplab;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("environment JSON round trip preserves the content hash") {
  const EnvironmentSpec env = testenv::e2_confounded(2);
  const io::json j = io::environment_to_json(env);
  const EnvironmentSpec back = io::environment_from_json(j);
  CHECK(io::env_hash(env) == io::env_hash(back));
  CHECK(back.name == env.name);
  CHECK(back.horizon == env.horizon);
  CHECK(back.policies[1].name == "informative");
}

TEST_CASE("checked-in environment files match the code-built test environments") {
  const std::string configs = std::string(BPLAB_SOURCE_DIR) + "/configs/";
  CHECK(io::env_hash(io::load_environment(configs + "e2_confounded.json")) ==
        io::env_hash(testenv::e2_confounded(2)));
  CHECK(io::env_hash(io::load_environment(configs + "e2_confounded_T1.json")) ==
        io::env_hash(testenv::e2_confounded(1)));
  CHECK(io::env_hash(io::load_environment(configs + "e2_unconfounded_T1.json")) ==
        io::env_hash(testenv::e2_unconfounded(1)));
  CHECK(io::env_hash(io::load_environment(configs + "asym_confounded_T1.json")) ==
        io::env_hash(testenv::asym_confounded(1)));
  CHECK_NOTHROW(io::load_environment(configs + "warehouse.json"));
}

TEST_CASE("malformed environments produce parse errors naming the field") {
  io::json j = io::environment_to_json(testenv::e2_confounded(1));
  j["policies"][0]["table"][0] = {0.6, 0.6};  // row does not sum to 1
  try {
    io::environment_from_json(j);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("policies[0]") != std::string::npos);
  }
  io::json j2 = io::environment_to_json(testenv::e2_confounded(1));
  j2["prior"] = {0.2, 0.2};
  CHECK_THROWS_AS(io::environment_from_json(j2), ParseError);
  io::json j3 = io::environment_to_json(testenv::e2_confounded(1));
  j3["tie_break"] = "coin_flip";
  CHECK_THROWS_AS(io::environment_from_json(j3), ParseError);
}

TEST_CASE("dataset save/load round trip is lossless and re-save is byte-identical") {
  const EnvironmentSpec env = testenv::e2_confounded(1);
  Dataset ds = generate_dataset(env, testenv::e2_behavioral(), 250, 9);
  ds.env_hash = io::env_hash(env);
  const std::string path = temp_path("bplab_test_dataset.txt");
  io::save_dataset(ds, env, path);
  const Dataset back = io::load_dataset(path, env);
  CHECK(back.seed == ds.seed);
  CHECK(back.strategy_descriptor == ds.strategy_descriptor);
  REQUIRE(back.records.size() == ds.records.size());
  CHECK(back.records == ds.records);

  const std::string path2 = temp_path("bplab_test_dataset2.txt");
  io::save_dataset(back, env, path2);
  std::ifstream a(path), b(path2);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("dataset loading rejects foreign environments and corrupt lines") {
  const EnvironmentSpec env = testenv::e2_confounded(1);
  Dataset ds = generate_dataset(env, testenv::e2_behavioral(), 5, 9);
  ds.env_hash = io::env_hash(env);
  const std::string path = temp_path("bplab_test_dataset3.txt");
  io::save_dataset(ds, env, path);

  const EnvironmentSpec other = testenv::asym_confounded(1);
  CHECK_THROWS_AS(io::load_dataset(path, other), ParseError);

  // Tamper with a reward field: the loader cross-checks the tables.
  {
    std::ifstream in(path);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = all.find("rs0=");
    REQUIRE(pos != std::string::npos);
    all.replace(pos, 7, "rs0=42 ");
    std::ofstream out(path);
    out << all;
  }
  CHECK_THROWS_AS(io::load_dataset(path, env), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("kvtree dump is indented key-value text") {
  io::json j;
  j["run"]["command"] = "evaluate";
  j["run"]["seed"] = 7;
  j["values"] = {1.5, 2.0};
  const std::string text = io::dump_kvtree(j);
  CHECK(text.find("run:\n") != std::string::npos);
  CHECK(text.find("  command: evaluate\n") != std::string::npos);
  CHECK(text.find("  seed: 7\n") != std::string::npos);
  CHECK(text.find("values: 1.5 2.0\n") != std::string::npos);
}

TEST_CASE("csv dumps carry labels and full-precision entries") {
  ConditionalMatrix cm;
  cm.values = Mat(2, 1);
  cm.values.at(0, 0) = 1.0 / 3.0;
  cm.values.at(1, 0) = 2.0 / 3.0;
  cm.row_labels = {"r0", "r1"};
  cm.col_labels = {"c0"};
  cm.context = "P(test)";
  const std::string path = temp_path("bplab_test_matrix.csv");
  io::write_csv(cm, path);
  std::ifstream in(path);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all.find("context,P(test)") != std::string::npos);
  CHECK(all.find("0.33333333333333331") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("meta-policy descriptors parse and validate") {
  const EnvironmentSpec env = testenv::e2_confounded(1);
  const io::json constant = {{"family", "constant"}, {"weights", {0.5, 0.5}}};
  CHECK(io::meta_policy_from_json(constant, env).mode == MetaPolicy::Mode::kConstant);
  const io::json la = {{"family", "last_action"},
                       {"rows", {{0.5, 0.5}, {0.9, 0.1}, {0.1, 0.9}}}};
  CHECK(io::meta_policy_from_json(la, env).mode == MetaPolicy::Mode::kLastAction);
  const io::json bad_width = {{"family", "constant"}, {"weights", {0.5, 0.25, 0.25}}};
  CHECK_THROWS_AS(io::meta_policy_from_json(bad_width, env), ParseError);
  const io::json unknown = {{"family", "mystery"}};
  CHECK_THROWS_AS(io::meta_policy_from_json(unknown, env), ParseError);
}

TEST_CASE("experiment configs resolve paths and validate mode") {
  const std::string dir = temp_path("bplab_cfg_dir");
  std::filesystem::create_directories(dir);
  {
    std::ofstream env_file(dir + "/env.json");
    env_file << io::environment_to_json(testenv::e2_confounded(1)).dump();
  }
  {
    std::ofstream cfg(dir + "/exp.json");
    cfg << R"({"environment":"env.json","behavioral":{"family":"constant","weights":[0.5,0.5]},)"
        << R"("n":50,"seed":3,"mode":"sample","out":"outdir"})";
  }
  const io::ExperimentConfig c = io::load_config(dir + "/exp.json");
  CHECK(c.environment_path == dir + "/env.json");
  CHECK(c.n == 50);
  CHECK(c.mode == "sample");
  {
    std::ofstream cfg(dir + "/bad.json");
    cfg << R"({"environment":"env.json","mode":"telepathy"})";
  }
  CHECK_THROWS_AS(io::load_config(dir + "/bad.json"), ParseError);
  std::filesystem::remove_all(dir);
}
