// Command-line front end: run one experiment, probe the mixing spectrum,
// sweep a config grid, or print a graph's matching decomposition.
//
// Exit codes: 0 success, 2 config/schema violation, 3 divergence,
// 4 infeasible spectral feasibility threshold.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "aldsgd/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitInfeasible = 4;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<int> stride;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_run_flags) {
  cmd->add_option("--config", flags.config_path, "JSON config path")
      ->required();
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--seed", flags.seed, "override the config seed");
  if (with_run_flags) {
    cmd->add_option("--jobs", flags.jobs, "parallelism");
    cmd->add_option("--stride", flags.stride, "metrics sampling stride");
  }
}

fs::path resolve_out(const CommonFlags& flags) {
  if (!flags.out_dir.empty()) return flags.out_dir;
  if (const char* env = std::getenv("ALDSGD_OUT")) return env;
  return ".";
}

aldsgd::FullConfig load_with_overrides(const CommonFlags& flags) {
  aldsgd::FullConfig config = aldsgd::load_config(flags.config_path);
  if (flags.seed) config.experiment.seed = *flags.seed;
  if (flags.jobs) config.experiment.jobs = *flags.jobs;
  if (flags.stride) config.experiment.stride = *flags.stride;
  return config;
}

int cmd_run(const CommonFlags& flags) {
  const aldsgd::FullConfig config = load_with_overrides(flags);
  const fs::path out = resolve_out(flags);
  fs::create_directories(out);

  const aldsgd::MetricsLog log = aldsgd::run_experiment(config.experiment);
  aldsgd::write_metrics_csv(log, (out / "metrics.csv").string());
  std::ofstream summary(out / "summary.json", std::ios::binary);
  summary << aldsgd::summary_to_json(log, config.experiment);
  summary.close();

  std::cout << "preset=" << aldsgd::preset_name(config.experiment.preset)
            << " seed=" << config.experiment.seed << " rounds="
            << log.summary.rounds_completed << " final_eval_mean="
            << log.summary.final_eval_mean << " avg_grad_norm="
            << log.summary.avg_grad_norm_mean
            << (log.summary.diverged ? " DIVERGED" : "") << "\n";
  return log.summary.diverged ? kExitDivergence : 0;
}

int cmd_spectral(const CommonFlags& flags) {
  const aldsgd::FullConfig config = load_with_overrides(flags);
  const auto& exp = config.experiment;
  const fs::path out = resolve_out(flags);
  fs::create_directories(out);

  const aldsgd::DynamicGraphSet dset =
      aldsgd::build_dynamic_set(exp.topology);
  const aldsgd::BudgetSchedule sched =
      aldsgd::BudgetSchedule::uniform(dset, exp.hyper.budget);
  const aldsgd::LambdaZeta lz = aldsgd::lambda_zeta(dset, sched);

  const double k_free =
      config.spectral.k_free.value_or(1.05 * aldsgd::k_threshold(lz));
  aldsgd::ParamRange range;
  try {
    range = aldsgd::alpha_range(lz, k_free);
  } catch (const std::invalid_argument& e) {
    std::cerr << "spectral: " << e.what() << "\n";
    return kExitInfeasible;
  }

  const double alpha = config.spectral.alpha.value_or(
      0.5 * (range.alpha_min + range.alpha_max));
  const double omega_cap = range.omega_max(alpha);
  const double omega =
      config.spectral.omega.value_or(std::max(0.0, 0.5 * omega_cap));

  aldsgd::RhoParams params;
  params.alpha = alpha;
  params.omega_n = params.omega_tau = 0.5 * omega;
  params.policy = config.spectral.policy;
  const aldsgd::SpectralReport report = aldsgd::estimate_rho(
      dset, sched, params, config.spectral.samples, exp.seed);
  const aldsgd::ContractionReport contraction = aldsgd::check_contraction(
      dset, sched, params, report.rho, config.spectral.n_products,
      config.spectral.trials, aldsgd::derive_seed(exp.seed, "contraction-cli"));

  json j;
  j["rho"] = report.rho;
  j["e1_norm"] = report.e1_norm;
  j["e2_norm"] = report.e2_norm;
  j["alpha_min"] = range.alpha_min;
  j["alpha_max"] = range.alpha_max;
  j["omega_max_at_alpha"] = omega_cap;
  j["lambda_min"] = range.lambda_min;
  j["lambda_max"] = range.lambda_max;
  j["zeta"] = range.zeta;
  j["samples"] = report.samples;
  j["seed"] = exp.seed;
  j["k_free"] = k_free;
  j["k_threshold"] = range.k_threshold;
  j["alpha"] = alpha;
  j["omega"] = omega;
  j["std_err"] = report.std_err;
  j["contraction"] = {{"empirical_mean", contraction.empirical_mean},
                      {"rho_power", contraction.rho_power},
                      {"std_err", contraction.std_err},
                      {"n_products", contraction.n_products},
                      {"trials", contraction.trials},
                      {"pass", contraction.pass}};

  const std::string text = j.dump(2) + "\n";
  std::ofstream file(out / "spectral.json", std::ios::binary);
  file << text;
  std::cout << text;
  return 0;
}

int cmd_decompose(const CommonFlags& flags) {
  const aldsgd::FullConfig config = load_with_overrides(flags);
  const aldsgd::DynamicGraphSet dset =
      aldsgd::build_dynamic_set(config.experiment.topology);

  json j;
  j["m"] = dset.node_count();
  json graphs = json::array();
  for (int i = 0; i < dset.graph_count(); ++i) {
    json matchings = json::array();
    for (const auto& matching : dset.decompositions[i]) {
      json edges = json::array();
      for (const auto& [u, v] : matching.edges) edges.push_back({u, v});
      matchings.push_back(edges);
    }
    graphs.push_back({{"total_degree", dset.graphs[i].total_degree()},
                      {"matchings", matchings}});
  }
  j["graphs"] = graphs;
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct SweepCell {
  aldsgd::ExperimentConfig experiment;
  std::string name;
  std::optional<int> target_degree;
  std::optional<double> budget;
};

int cmd_sweep(const CommonFlags& flags) {
  const aldsgd::FullConfig config = load_with_overrides(flags);
  const auto& sweep = config.sweep;
  if (sweep.empty()) {
    std::cerr << "sweep: no axes configured\n";
    return kExitConfig;
  }
  const fs::path out = resolve_out(flags);
  fs::create_directories(out);

  auto axis_or = [](auto values, auto fallback) {
    using T = typename decltype(values)::value_type;
    return values.empty() ? std::vector<T>{fallback} : values;
  };
  const auto targets = sweep.target_degree;
  const auto budgets = axis_or(sweep.budgets, config.experiment.hyper.budget);
  const auto presets = axis_or(sweep.presets, config.experiment.preset);
  const auto seeds = axis_or(sweep.seeds, config.experiment.seed);
  const auto rounds = axis_or(sweep.rounds, config.experiment.rounds);

  std::vector<SweepCell> cells;
  const auto target_axis = targets.empty()
                               ? std::vector<std::optional<int>>{std::nullopt}
                               : [&] {
                                   std::vector<std::optional<int>> axis;
                                   for (int t : targets) axis.push_back(t);
                                   return axis;
                                 }();
  for (const auto& target : target_axis)
    for (double budget : budgets)
      for (aldsgd::Preset preset : presets)
        for (std::uint64_t seed : seeds)
          for (long k : rounds) {
            SweepCell cell;
            cell.experiment = config.experiment;
            cell.experiment.preset = preset;
            cell.experiment.hyper.budget = budget;
            cell.experiment.seed = seed;
            cell.experiment.rounds = k;
            if (target) cell.experiment.topology.target_degree = *target;
            cell.target_degree = target;
            cell.budget = budget;
            cell.name = "preset_" + aldsgd::preset_name(preset) +
                        (target ? "_D" + std::to_string(*target) : "") +
                        "_cb" + std::to_string(budget).substr(0, 4) + "_seed" +
                        std::to_string(seed) + "_K" + std::to_string(k);
            cells.push_back(std::move(cell));
          }
  if (cells.empty()) {
    std::cerr << "sweep: empty cell product\n";
    return kExitConfig;
  }

  std::vector<std::string> lines(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex log_mutex;
  const int jobs =
      std::max(1, std::min<int>(config.experiment.jobs,
                                static_cast<int>(cells.size())));

  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= cells.size()) return;
      auto& cell = cells[idx];
      cell.experiment.jobs = 1;  // cells are the unit of parallelism
      try {
        const aldsgd::MetricsLog log = aldsgd::run_experiment(cell.experiment);
        const fs::path cell_dir = out / cell.name;
        fs::create_directories(cell_dir);
        aldsgd::write_metrics_csv(log, (cell_dir / "metrics.csv").string());
        std::ofstream summary(cell_dir / "summary.json", std::ios::binary);
        summary << aldsgd::summary_to_json(log, cell.experiment);

        char buf[512];
        std::snprintf(
            buf, sizeof(buf), "%s,%s,%s,%.17g,%llu,%ld,%d,%.17g,%.17g,%.17g,%.17g",
            cell.name.c_str(),
            aldsgd::preset_name(cell.experiment.preset).c_str(),
            cell.target_degree ? std::to_string(*cell.target_degree).c_str()
                               : "",
            cell.experiment.hyper.budget,
            static_cast<unsigned long long>(cell.experiment.seed),
            cell.experiment.rounds, log.summary.diverged ? 1 : 0,
            log.summary.final_eval_mean, log.summary.final_eval_avg_model,
            log.summary.avg_grad_norm_mean, log.summary.final_consensus);
        lines[idx] = buf;
      } catch (const std::exception& e) {
        std::scoped_lock lock(log_mutex);
        std::cerr << "cell " << cell.name << " failed: " << e.what() << "\n";
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::ofstream aggregate(out / "aggregate.csv", std::ios::binary);
  aggregate << "cell,preset,target_D,c_b,seed,K,diverged,final_eval_mean,"
               "final_eval_avg_model,avg_grad_norm_mean,final_consensus\n";
  for (const auto& line : lines)
    if (!line.empty()) aggregate << line << "\n";
  std::cout << "sweep: " << cells.size() << " cells -> "
            << (out / "aggregate.csv") << "\n";
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decentralized gossip SGD simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags, spectral_flags, sweep_flags, decompose_flags;
  CLI::App* run = app.add_subcommand("run", "run one experiment");
  add_common(run, run_flags, true);
  CLI::App* spectral =
      app.add_subcommand("spectral", "mixing-spectrum report");
  add_common(spectral, spectral_flags, false);
  CLI::App* sweep = app.add_subcommand("sweep", "run a config grid");
  add_common(sweep, sweep_flags, true);
  CLI::App* decompose =
      app.add_subcommand("decompose", "print matching decomposition");
  add_common(decompose, decompose_flags, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (spectral->parsed()) return cmd_spectral(spectral_flags);
    if (sweep->parsed()) return cmd_sweep(sweep_flags);
    if (decompose->parsed()) return cmd_decompose(decompose_flags);
  } catch (const aldsgd::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const aldsgd::DivergenceError& e) {
    std::cerr << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
