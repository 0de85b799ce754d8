#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "aldsgd/objectives.hpp"
#include "aldsgd/protocol.hpp"
#include "aldsgd/topology.hpp"

namespace aldsgd {

// dpsgd: no leader terms, static full-budget graph.  matcha: no leader
// terms, static graph under the configured budget.  aldsgd: leader terms
// with the reference defaults (lambda = omega = 0.1 each).  theorem2:
// aldsgd with lambda = sqrt(m/K) and gamma = sqrt(m / ((1-omega)(1-alpha)K)).
enum class Preset { dpsgd, matcha, aldsgd, theorem2, custom };

struct InitMode {
  enum class Kind { distinct_gaussian, identical };
  Kind kind = Kind::distinct_gaussian;
  double sigma = 1.0;        // distinct_gaussian scale
  Eigen::VectorXd value;     // identical: full vector, scalar broadcast, or
                             // empty for zeros
};

struct ExperimentConfig {
  TopologyDesc topology;
  ProblemSpec problem;
  HyperParams hyper;
  Preset preset = Preset::custom;
  long rounds = 0;  // K
  std::uint64_t seed = 0;
  int stride = 10;
  int jobs = 1;
  InitMode init;
};

// Resolve preset-implied hyperparameters in place (idempotent).
void apply_preset(ExperimentConfig& config);

SystemState init_workers(int m, int dim, const InitMode& mode,
                         std::uint64_t seed);

// ||X (I - J)||_F = sqrt(sum_i ||x_i - mean||^2).
double consensus_distance(const SystemState& state);

struct MetricsRow {
  long round = 0;
  int node = 0;
  double local_loss = 0.0;
  double eval_loss = 0.0;
  double consensus = 0.0;      // populated on node-0 rows
  double grad_norm_sq = 0.0;   // populated on node-0 rows
};

struct Summary {
  double avg_grad_norm_mean = 0.0;  // (1/K) sum_k ||grad F(mean_k)||^2
  std::vector<double> final_eval;
  double final_eval_mean = 0.0;
  double final_eval_avg_model = 0.0;
  double final_consensus = 0.0;
  double wall_seconds = 0.0;
  bool diverged = false;
  long rounds_completed = 0;
};

struct MetricsLog {
  std::vector<MetricsRow> rows;  // dense in k at the configured stride
  // Per-round series, k = 1..rounds_completed.
  std::vector<double> consensus_sq_by_round;
  std::vector<double> grad_norm_sq_by_round;
  TrajectorySample trajectory;  // snapshots at stride + leader-distance max
  Eigen::VectorXd final_model;
  Summary summary;
};

MetricsLog run_experiment(const ExperimentConfig& config);

// CSV: k,node,local_loss,eval_loss,consensus_dist,global_grad_norm_sq with
// consensus/grad-norm blank except on node 0.  Full-precision, stable bytes.
std::string metrics_to_csv(const MetricsLog& log);
void write_metrics_csv(const MetricsLog& log, const std::string& path);
std::string summary_to_json(const MetricsLog& log,
                            const ExperimentConfig& config);

// Inputs to the convergence bound: measured problem constants, the mixing
// contraction factor, the effective step eta = (1-alpha)(1-omega)gamma, the
// combined pulling strength lambda = 2 lambda_n = 2 lambda_tau, and the
// initial/optimal objective values.
struct BoundInputs {
  ConstantEstimates constants;
  double rho = 0.0;
  double eta = 0.0;
  double lambda = 0.0;
  long rounds = 0;
  int m = 0;
  double f_init = 0.0;
  double f_star = 0.0;
};

// 8(F1-F*)/(eta K) + 8M/eta + (8 eta^2 L^2 rho / (1-sqrt(rho))) *
// ((m sigma^2 + lambda^2 Delta^2) / (m (1+sqrt(rho))) + 3 zeta^2/(1-sqrt(rho)))
// with M = eta^2 L sigma^2/(2m) + lambda eta beta Delta
//        + lambda eta^2 L beta Delta + lambda^2 eta^2 L Delta^2 / 2.
// Requires rho < 1 and eta L <= min(1, sqrt(1/rho) - 1).
double convergence_bound(const BoundInputs& inputs);

}  // namespace aldsgd
