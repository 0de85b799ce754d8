#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aldsgd/config.hpp"

using namespace aldsgd;
namespace fs = std::filesystem;

namespace {

const char* kRunConfig = R"json({
  "schema": 1,
  "preset": "aldsgd",
  "seed": 5,
  "rounds": 40,
  "stride": 10,
  "topology": {"kind": "pendant_ring", "m": 8, "dynamic_n": 3},
  "problem": {"kind": "quadratic", "d": 5, "n_samples": 128, "batch_size": 4},
  "hyper": {"gamma": 0.1, "alpha": 0.2, "c_b": 0.5}
})json";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("aldsgd_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string command =
      std::string(ALDSGD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config parsing applies defaults and presets") {
  const FullConfig config = parse_config(kRunConfig);
  CHECK(config.experiment.preset == Preset::aldsgd);
  CHECK(config.experiment.topology.m == 8);
  CHECK(config.experiment.topology.dynamic_n == 3);
  CHECK(config.experiment.hyper.budget == 0.5);
  // aldsgd preset fills the reference leader weights when unspecified.
  CHECK(config.experiment.hyper.lambda_n == 0.1);
  CHECK(config.experiment.hyper.omega_tau == 0.1);
  CHECK(config.experiment.stride == 10);
  CHECK(config.spectral.samples == 2000);
}

TEST_CASE("schema violations carry the field path") {
  try {
    parse_config(R"({"schema": 1, "topology": {"m": 4}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field_path == "topology.kind");
  }
  try {
    parse_config(R"({"schema": 1,
                     "topology": {"kind": "ring", "m": 4},
                     "problem": {"partition": {"label_skew": 1.5}}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field_path == "problem.partition.label_skew");
  }
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema": 2,
                                   "topology": {"kind": "ring", "m": 4}})"),
                  ConfigError);
}

TEST_CASE("config round-trips through serialization") {
  const std::string with_extras = R"json({
    "schema": 1,
    "preset": "matcha",
    "seed": 11,
    "rounds": 200,
    "topology": {"kind": "explicit", "m": 4,
                 "edges": [[0,1],[1,2],[2,3],[0,3]],
                 "dynamic_n": 2, "shifts": [0, 2], "target_D": 4},
    "problem": {"kind": "logistic", "d": 6,
                "partition": {"label_skew": 0.8}, "seed": 77},
    "hyper": {"gamma": 0.3, "lr_schedule": [[50, 0.1]], "c_b": 0.5},
    "init": {"kind": "identical", "value": 1.5},
    "spectral": {"samples": 500, "k_free": 12.0, "alpha": 0.2},
    "sweep": {"axes": {"preset": ["dpsgd", "aldsgd"], "seed": [1, 2, 3]}}
  })json";
  const FullConfig once = parse_config(with_extras);
  const std::string serialized = config_to_json(once);
  const FullConfig twice = parse_config(serialized);
  CHECK(config_to_json(twice) == serialized);
  CHECK(twice.experiment.hyper.lr_schedule.size() == 1);
  CHECK(twice.sweep.cells() == 6);
  CHECK(twice.experiment.init.value(0) == 1.5);
}

TEST_CASE("cli run writes deterministic outputs") {
  const fs::path dir = fresh_dir("cli_run");
  const fs::path config_path = dir / "config.json";
  std::ofstream(config_path) << kRunConfig;

  const fs::path out_a = dir / "a";
  const fs::path out_b = dir / "b";
  REQUIRE(run_cli("run --config " + config_path.string() + " --out " +
                  out_a.string()) == 0);
  REQUIRE(run_cli("run --config " + config_path.string() + " --out " +
                  out_b.string() + " --jobs 8") == 0);
  const std::string csv_a = read_file(out_a / "metrics.csv");
  CHECK(!csv_a.empty());
  CHECK(csv_a == read_file(out_b / "metrics.csv"));
  CHECK(fs::exists(out_a / "summary.json"));
}

TEST_CASE("cli rejects malformed configs with exit 2") {
  const fs::path dir = fresh_dir("cli_bad");
  const fs::path config_path = dir / "bad.json";
  std::ofstream(config_path) << R"({"schema": 1, "topology": {"m": 0}})";
  CHECK(run_cli("run --config " + config_path.string() + " --out " +
                dir.string()) == 2);
}

TEST_CASE("cli exits 3 on divergence") {
  const fs::path dir = fresh_dir("cli_diverge");
  const fs::path config_path = dir / "config.json";
  std::ofstream(config_path) << R"json({
    "schema": 1,
    "preset": "dpsgd",
    "rounds": 20,
    "topology": {"kind": "ring", "m": 4},
    "problem": {"kind": "quadratic", "d": 4, "n_samples": 64, "batch_size": 4},
    "hyper": {"gamma": 1e160, "alpha": 0.25}
  })json";
  CHECK(run_cli("run --config " + config_path.string() + " --out " +
                dir.string()) == 3);
}

TEST_CASE("cli exits 4 when the feasibility threshold is violated") {
  const fs::path dir = fresh_dir("cli_infeasible");
  const fs::path config_path = dir / "config.json";
  std::ofstream(config_path) << R"json({
    "schema": 1,
    "topology": {"kind": "pendant_ring", "m": 8, "dynamic_n": 3},
    "hyper": {"c_b": 0.5},
    "spectral": {"samples": 50, "k_free": 1.0}
  })json";
  CHECK(run_cli("spectral --config " + config_path.string() + " --out " +
                dir.string()) == 4);
}

TEST_CASE("cli spectral reports the averaging window") {
  const fs::path dir = fresh_dir("cli_spectral");
  const fs::path config_path = dir / "config.json";
  std::ofstream(config_path) << R"json({
    "schema": 1,
    "seed": 3,
    "topology": {"kind": "complete", "m": 4},
    "hyper": {"c_b": 1.0},
    "spectral": {"samples": 200, "alpha": 0.25, "omega": 0.0, "k_free": 1.5}
  })json";
  REQUIRE(run_cli("spectral --config " + config_path.string() + " --out " +
                  dir.string()) == 0);
  const auto report = nlohmann::json::parse(read_file(dir / "spectral.json"));
  // alpha = 1/m turns the full complete-graph mixing into the projector onto
  // consensus, which contracts everything orthogonal to it in one hop.
  CHECK(report["rho"].get<double>() < 1e-9);
  CHECK(report["samples"].get<int>() == 200);
  CHECK(report["seed"].get<std::uint64_t>() == 3);
  CHECK(report["zeta"].get<double>() == 0.0);
  for (const char* key :
       {"rho", "e1_norm", "e2_norm", "alpha_min", "alpha_max",
        "omega_max_at_alpha", "lambda_min", "lambda_max", "zeta", "samples",
        "seed"})
    CHECK(report.contains(key));
}

TEST_CASE("cli decompose prints matchings as json") {
  const fs::path dir = fresh_dir("cli_decompose");
  const fs::path config_path = dir / "config.json";
  std::ofstream(config_path) << R"json({
    "schema": 1,
    "topology": {"kind": "ring", "m": 4, "dynamic_n": 2}
  })json";
  const std::string command = std::string(ALDSGD_CLI_PATH) +
                              " decompose --config " + config_path.string() +
                              " > " + (dir / "out.json").string();
  REQUIRE(WEXITSTATUS(std::system(command.c_str())) == 0);
  const auto decomposition = nlohmann::json::parse(read_file(dir / "out.json"));
  CHECK(decomposition["m"] == 4);
  CHECK(decomposition["graphs"].size() == 2);
  CHECK(decomposition["graphs"][0]["matchings"].size() == 2);
}

TEST_CASE("cli sweep aggregates one row per cell") {
  const fs::path dir = fresh_dir("cli_sweep");
  const fs::path config_path = dir / "config.json";
  std::ofstream(config_path) << R"json({
    "schema": 1,
    "preset": "dpsgd",
    "seed": 5,
    "rounds": 20,
    "stride": 10,
    "topology": {"kind": "ring", "m": 4},
    "problem": {"kind": "quadratic", "d": 4, "n_samples": 64, "batch_size": 4},
    "hyper": {"gamma": 0.1, "alpha": 0.25},
    "sweep": {"axes": {"preset": ["dpsgd", "aldsgd"], "seed": [1, 2, 3]}}
  })json";
  REQUIRE(run_cli("sweep --config " + config_path.string() + " --out " +
                  (dir / "out").string() + " --jobs 2") == 0);
  const std::string aggregate = read_file(dir / "out" / "aggregate.csv");
  CHECK(std::count(aggregate.begin(), aggregate.end(), '\n') == 1 + 6);

  // Cell parallelism must not change the aggregate bytes.
  REQUIRE(run_cli("sweep --config " + config_path.string() + " --out " +
                  (dir / "serial").string() + " --jobs 1") == 0);
  CHECK(read_file(dir / "serial" / "aggregate.csv") == aggregate);

  // A sweep section without axes is an empty product.
  std::ofstream(config_path, std::ios::trunc) << R"json({
    "schema": 1,
    "topology": {"kind": "ring", "m": 4},
    "problem": {"kind": "quadratic", "d": 4, "n_samples": 64}
  })json";
  CHECK(run_cli("sweep --config " + config_path.string() + " --out " +
                (dir / "out2").string()) == 2);
}

TEST_CASE("ALDSGD_OUT provides the default output root") {
  const fs::path dir = fresh_dir("cli_envout");
  const fs::path config_path = dir / "config.json";
  std::ofstream(config_path) << kRunConfig;
  const std::string command = "ALDSGD_OUT=" + (dir / "env_out").string() + " " +
                              std::string(ALDSGD_CLI_PATH) + " run --config " +
                              config_path.string() + " > /dev/null 2>&1";
  REQUIRE(WEXITSTATUS(std::system(command.c_str())) == 0);
  CHECK(fs::exists(dir / "env_out" / "metrics.csv"));
}
