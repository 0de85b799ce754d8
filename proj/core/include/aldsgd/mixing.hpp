#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "aldsgd/rng.hpp"
#include "aldsgd/topology.hpp"

namespace aldsgd {

// Per-matching Bernoulli activation probabilities under a communication
// budget c_b.  Probabilities are uniform (= c_b) across matchings, which
// keeps the expected fraction of active links exactly c_b.
struct BudgetSchedule {
  double budget = 1.0;
  // probabilities[graph][matching]
  std::vector<std::vector<double>> probabilities;

  static BudgetSchedule uniform(const DynamicGraphSet& dset, double budget);
};

enum class MixingKind { base, effective };

struct MixingMatrix {
  Eigen::MatrixXd entries;
  MixingKind kind = MixingKind::base;
  // Set when alpha * max degree > 1 produced negative base weights.  Such
  // matrices are still usable; whether they contract is a spectral question.
  bool negative_weights = false;
};

// One round's sampled communication state: the phase graph index, the edges
// whose matchings drew an active Bernoulli, and their Laplacian.
struct SampledTopology {
  int phase = 0;
  std::vector<Edge> active_edges;
  Eigen::MatrixXd laplacian;
};

// Phase schedule: round k (1-based) maps to graphs[0] when k mod n == 1,
// graphs[1] when k mod n == 2, ..., graphs[n-1] when k mod n == 0.
int phase_index(long round, int graph_count);

// Draw the round's active matchings and assemble their Laplacian.
SampledTopology sample_topology(const DynamicGraphSet& dset, long round,
                                const BudgetSchedule& sched, Rng& rng);
Eigen::MatrixXd sample_laplacian(const DynamicGraphSet& dset, long round,
                                 const BudgetSchedule& sched, Rng& rng);

// W = I - alpha * L.  Symmetric and doubly stochastic for any Laplacian.
MixingMatrix base_weight_matrix(const Eigen::MatrixXd& lap, double alpha);

// Column i of the result is one-hot at leaders[i]; every leader must lie in
// the closed neighborhood of i given by `neighbor_sets` (self included).
Eigen::MatrixXd selection_matrix(const std::vector<int>& leaders,
                                 const std::vector<std::vector<int>>& neighbor_sets);
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> selection_matrices(
    const std::vector<std::pair<int, int>>& leaders,
    const std::vector<std::vector<int>>& neighbor_sets);

// W~ = (1 - wN - wT) W + wN A_N + wT A_T; left stochastic.
MixingMatrix effective_mixing(const MixingMatrix& base,
                              const Eigen::MatrixXd& a_best,
                              const Eigen::MatrixXd& a_maxdeg, double omega_n,
                              double omega_tau);

// Closed neighborhoods {i} + active neighbors induced by an edge subset.
std::vector<std::vector<int>> closed_neighborhoods(int m,
                                                   const std::vector<Edge>& edges);

// Row-major full-precision CSV, for debugging.
std::string matrix_to_csv(const Eigen::MatrixXd& mat);

}  // namespace aldsgd
