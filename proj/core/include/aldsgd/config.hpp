#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aldsgd/engine.hpp"
#include "aldsgd/spectral.hpp"

namespace aldsgd {

// Schema violation with the offending field path, e.g. "topology.m".
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error("config error at " + path + ": " + message),
        field_path(path) {}
  std::string field_path;
};

struct SpectralSection {
  int samples = 2000;
  std::optional<double> k_free;  // default: 1.05x the feasibility threshold
  std::optional<double> alpha;   // default: midpoint of the alpha range
  std::optional<double> omega;   // total leader weight; default omega_max/2
  int n_products = 20;
  int trials = 500;
  LeaderPolicy policy = LeaderPolicy::uniform_neighborhood;
};

// Sweep axes; absent axes keep the base config's value.
struct SweepSpec {
  std::vector<int> target_degree;
  std::vector<double> budgets;
  std::vector<Preset> presets;
  std::vector<std::uint64_t> seeds;
  std::vector<long> rounds;

  bool empty() const {
    return target_degree.empty() && budgets.empty() && presets.empty() &&
           seeds.empty() && rounds.empty();
  }
  std::size_t cells() const;
};

struct FullConfig {
  ExperimentConfig experiment;
  SpectralSection spectral;
  SweepSpec sweep;
};

FullConfig parse_config(const std::string& json_text);
FullConfig load_config(const std::string& path);
// Serializes with all defaults materialized; parse(config_to_json(c))
// round-trips to an identical structure.
std::string config_to_json(const FullConfig& config);

std::string preset_name(Preset preset);
Preset preset_from_name(const std::string& name);

}  // namespace aldsgd
