#include "aldsgd/engine.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace aldsgd {

namespace {

std::string fmt(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

constexpr double kDivergenceLossCap = 1e12;

}  // namespace

void apply_preset(ExperimentConfig& config) {
  auto& hp = config.hyper;
  switch (config.preset) {
    case Preset::dpsgd:
      hp.lambda_n = hp.lambda_tau = 0.0;
      hp.omega_n = hp.omega_tau = 0.0;
      hp.budget = 1.0;
      config.topology.dynamic_n = 1;
      config.topology.shifts = {0};
      break;
    case Preset::matcha:
      hp.lambda_n = hp.lambda_tau = 0.0;
      hp.omega_n = hp.omega_tau = 0.0;
      config.topology.dynamic_n = 1;
      config.topology.shifts = {0};
      break;
    case Preset::theorem2: {
      if (config.rounds < 1)
        throw std::invalid_argument("theorem2 preset needs rounds >= 1");
      const double m = config.topology.m;
      const double horizon = static_cast<double>(config.rounds);
      const double lambda = std::sqrt(m / horizon);
      hp.lambda_n = hp.lambda_tau = 0.5 * lambda;
      const double omega = hp.omega_n + hp.omega_tau;
      hp.gamma =
          std::sqrt(m / ((1.0 - omega) * (1.0 - hp.alpha) * horizon));
      hp.lr_schedule.clear();
      break;
    }
    case Preset::aldsgd:
    case Preset::custom:
      break;
  }
  hp.n_graphs = config.topology.dynamic_n;
}

SystemState init_workers(int m, int dim, const InitMode& mode,
                         std::uint64_t seed) {
  SystemState state;
  state.workers.resize(m);
  for (int i = 0; i < m; ++i) {
    auto& worker = state.workers[i];
    worker.params.resize(dim);
    if (mode.kind == InitMode::Kind::distinct_gaussian) {
      Rng rng = stream(seed, "init", static_cast<std::uint64_t>(i));
      for (int t = 0; t < dim; ++t) worker.params(t) = mode.sigma * rng.normal();
    } else if (mode.value.size() == dim) {
      worker.params = mode.value;
    } else if (mode.value.size() == 1) {
      worker.params.setConstant(mode.value(0));
    } else if (mode.value.size() == 0) {
      worker.params.setZero();
    } else {
      throw std::invalid_argument("identical init vector has wrong dimension");
    }
  }
  return state;
}

double consensus_distance(const SystemState& state) {
  const Eigen::VectorXd mean = output_model(state);
  double sum = 0.0;
  for (const auto& worker : state.workers)
    sum += (worker.params - mean).squaredNorm();
  return std::sqrt(sum);
}

MetricsLog run_experiment(const ExperimentConfig& raw) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig config = raw;
  apply_preset(config);
  config.hyper.validate();
  if (config.rounds < 0) throw std::invalid_argument("rounds must be >= 0");
  if (config.stride < 1) throw std::invalid_argument("stride must be >= 1");

  const int m = config.topology.m;
  const Problem problem =
      make_problem(config.problem, m, derive_seed(config.seed, "problem"));
  const DynamicGraphSet dset = build_dynamic_set(config.topology);
  const BudgetSchedule sched =
      BudgetSchedule::uniform(dset, config.hyper.budget);

  SystemState state =
      init_workers(m, problem.param_dim(), config.init, config.seed);

  MetricsLog log;
  const auto record_rows = [&](const SystemState& s) {
    const double consensus = consensus_distance(s);
    const double grad_norm = problem.global_grad_norm_sq(output_model(s));
    for (int i = 0; i < m; ++i) {
      MetricsRow row;
      row.round = s.round;
      row.node = i;
      row.local_loss = s.round == 0
                           ? problem.local_loss(i, s.workers[i].params)
                           : s.workers[i].last_loss;
      row.eval_loss = problem.eval_loss(s.workers[i].params);
      if (i == 0) {
        row.consensus = consensus;
        row.grad_norm_sq = grad_norm;
      }
      log.rows.push_back(row);
    }
    log.trajectory.states.push_back(s.stacked());
  };

  record_rows(state);

  for (long k = 1; k <= config.rounds; ++k) {
    RoundStats stats;
    try {
      state = round(state, config.hyper, dset, sched, problem, config.seed,
                    config.jobs, &stats);
    } catch (const DivergenceError&) {
      log.summary.diverged = true;
      break;
    }
    log.trajectory.delta_sq_max =
        std::max(log.trajectory.delta_sq_max, stats.max_leader_dist_sq);

    const double consensus = consensus_distance(state);
    log.consensus_sq_by_round.push_back(consensus * consensus);
    log.grad_norm_sq_by_round.push_back(
        problem.global_grad_norm_sq(output_model(state)));

    if (!std::isfinite(stats.max_local_loss) ||
        stats.max_local_loss > kDivergenceLossCap) {
      log.summary.diverged = true;
      record_rows(state);
      break;
    }
    if (k % config.stride == 0 || k == config.rounds) record_rows(state);
  }

  log.summary.rounds_completed = state.round;
  log.final_model = output_model(state);
  if (!log.grad_norm_sq_by_round.empty()) {
    double acc = 0.0;
    for (double v : log.grad_norm_sq_by_round) acc += v;
    log.summary.avg_grad_norm_mean = acc / log.grad_norm_sq_by_round.size();
  }
  log.summary.final_eval.resize(m);
  double eval_sum = 0.0;
  for (int i = 0; i < m; ++i) {
    log.summary.final_eval[i] = problem.eval_loss(state.workers[i].params);
    eval_sum += log.summary.final_eval[i];
  }
  log.summary.final_eval_mean = eval_sum / m;
  log.summary.final_eval_avg_model = problem.eval_loss(log.final_model);
  log.summary.final_consensus = consensus_distance(state);
  log.summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return log;
}

std::string metrics_to_csv(const MetricsLog& log) {
  std::string csv =
      "k,node,local_loss,eval_loss,consensus_dist,global_grad_norm_sq\n";
  for (const auto& row : log.rows) {
    csv += std::to_string(row.round);
    csv += ',';
    csv += std::to_string(row.node);
    csv += ',';
    csv += fmt(row.local_loss);
    csv += ',';
    csv += fmt(row.eval_loss);
    csv += ',';
    if (row.node == 0) csv += fmt(row.consensus);
    csv += ',';
    if (row.node == 0) csv += fmt(row.grad_norm_sq);
    csv += '\n';
  }
  return csv;
}

void write_metrics_csv(const MetricsLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << metrics_to_csv(log);
}

std::string summary_to_json(const MetricsLog& log,
                            const ExperimentConfig& config) {
  nlohmann::json j;
  j["schema"] = 1;
  j["seed"] = config.seed;
  j["rounds_completed"] = log.summary.rounds_completed;
  j["diverged"] = log.summary.diverged;
  j["avg_grad_norm_mean"] = log.summary.avg_grad_norm_mean;
  j["final_eval"] = log.summary.final_eval;
  j["final_eval_mean"] = log.summary.final_eval_mean;
  j["final_eval_avg_model"] = log.summary.final_eval_avg_model;
  j["final_consensus"] = log.summary.final_consensus;
  j["wall_seconds"] = log.summary.wall_seconds;
  return j.dump(2) + "\n";
}

double convergence_bound(const BoundInputs& in) {
  if (!(in.rho < 1.0))
    throw std::invalid_argument("bound requires rho < 1");
  if (in.rounds < 1) throw std::invalid_argument("bound requires K >= 1");
  const double eta_l = in.eta * in.constants.l_smooth;
  if (eta_l > 1.0)
    throw std::invalid_argument("bound requires eta*L <= 1");
  if (in.rho > 0.0 && eta_l > std::sqrt(1.0 / in.rho) - 1.0)
    throw std::invalid_argument("bound requires eta*L <= sqrt(1/rho) - 1");

  const double l = in.constants.l_smooth;
  const double beta = in.constants.beta_lip;
  const double sigma_sq = in.constants.sigma_sq;
  const double zeta_sq = in.constants.zeta_sq;
  const double delta = std::sqrt(in.constants.delta_sq);
  const double eta = in.eta;
  const double lambda = in.lambda;
  const double m = static_cast<double>(in.m);
  const double horizon = static_cast<double>(in.rounds);

  const double moment = eta * eta * l * sigma_sq / (2.0 * m) +
                        lambda * eta * beta * delta +
                        lambda * eta * eta * l * beta * delta +
                        0.5 * lambda * lambda * eta * eta * l * delta * delta;
  const double head = 8.0 * (in.f_init - in.f_star) / (eta * horizon);
  const double drift = 8.0 * moment / eta;
  double tail = 0.0;
  if (in.rho > 0.0) {
    const double root = std::sqrt(in.rho);
    tail = (8.0 * eta * eta * l * l * in.rho / (1.0 - root)) *
           ((m * sigma_sq + lambda * lambda * delta * delta) /
                (m * (1.0 + root)) +
            3.0 * zeta_sq / (1.0 - root));
  }
  return head + drift + tail;
}

}  // namespace aldsgd
