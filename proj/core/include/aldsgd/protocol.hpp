#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "aldsgd/mixing.hpp"
#include "aldsgd/objectives.hpp"
#include "aldsgd/topology.hpp"

namespace aldsgd {

// Round hyperparameters.  lambda_* are the pulling strengths toward the
// best-loss and max-degree leaders; omega_* their extra averaging weights.
// With lambda = omega = 0, n_graphs = 1 and budget = 1 a round degenerates
// to plain decentralized SGD; budget < 1 alone gives budgeted matching
// activation.
struct HyperParams {
  double gamma = 0.05;
  std::vector<std::pair<long, double>> lr_schedule;  // (round, multiplier)
  double lambda_n = 0.0;
  double lambda_tau = 0.0;
  double omega_n = 0.0;
  double omega_tau = 0.0;
  double alpha = 0.25;
  double budget = 1.0;
  int n_graphs = 1;
  int start_phase = 0;  // offsets the round -> phase assignment

  void validate() const;
  // Base rate times every schedule multiplier whose round has been reached.
  double gamma_at(long round) const;
};

struct WorkerState {
  Eigen::VectorXd params;
  double last_loss = 0.0;  // minibatch training loss on the worker's shard
  int degree = 0;          // degree in the current round's active graph
};

struct SystemState {
  std::vector<WorkerState> workers;
  long round = 0;  // rounds completed

  int worker_count() const { return static_cast<int>(workers.size()); }
  int dim() const { return static_cast<int>(workers.front().params.size()); }
  Eigen::MatrixXd stacked() const;  // dim x m
};

// Thrown when parameters stop being finite.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Cheap per-round observables, always available.
struct RoundStats {
  double max_leader_dist_sq = 0.0;
  double max_local_loss = 0.0;
  int phase = 0;
};

// Full per-round internals, captured on request for diagnostics and
// equivalence checks.
struct RoundTrace {
  Eigen::MatrixXd w_base;
  Eigen::MatrixXd gradients;  // dim x m
  std::vector<std::pair<int, int>> leaders;
  std::vector<Edge> active_edges;
  double gamma = 0.0;
};

// Leaders over the closed neighborhood of `node` in the active graph:
// lowest last_loss and highest active degree, ties to the lowest index.
// An isolated node leads itself.
std::pair<int, int> select_leaders(int node,
                                   const std::vector<std::vector<int>>& closed_nbrs,
                                   const std::vector<WorkerState>& workers);

// x - gamma*g - gamma*lambda_n*(x - x_best) - gamma*lambda_tau*(x - x_maxdeg).
Eigen::VectorXd corrective_step(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& grad,
                                const Eigen::VectorXd& x_best,
                                const Eigen::VectorXd& x_maxdeg, double gamma,
                                double lambda_n, double lambda_tau);

// (1-wN-wT) * (sum_{j != i} W_ij x_j + W_ii x_half) + wN x_best + wT x_maxdeg,
// where neighbor and leader parameters are the pre-round values.
Eigen::VectorXd leader_average(int node, const std::vector<WorkerState>& workers,
                               const Eigen::VectorXd& x_half,
                               const Eigen::MatrixXd& w_base,
                               const Eigen::VectorXd& x_best,
                               const Eigen::VectorXd& x_maxdeg, double omega_n,
                               double omega_tau);

// One synchronous round: per-worker stochastic gradients, matching
// activation draw, leader selection on the active graph, corrective local
// step, leader-weighted averaging against the pre-round snapshot, phase
// advance.  Deterministic in (seed, round) regardless of `jobs`.
SystemState round(const SystemState& state, const HyperParams& hp,
                  const DynamicGraphSet& dset, const BudgetSchedule& sched,
                  const Problem& problem, std::uint64_t seed, int jobs = 1,
                  RoundStats* stats = nullptr, RoundTrace* trace = nullptr);

// Average of all worker models.
Eigen::VectorXd output_model(const SystemState& state);

}  // namespace aldsgd
