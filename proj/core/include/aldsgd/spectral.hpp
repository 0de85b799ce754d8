#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "aldsgd/mixing.hpp"
#include "aldsgd/topology.hpp"

namespace aldsgd {

// Extremal eigenvalues of the expected activation Laplacians.  Per phase
// graph i, M_i = sum_j p_ij L_ij and N_i = sum_j p_ij (1 - p_ij) L_ij over
// its matchings; lambda_min/lambda_max are the extreme nonzero eigenvalues
// of the M_i across phases and zeta the largest spectral norm of the N_i.
struct LambdaZeta {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double zeta = 0.0;
  int node_count = 0;
  // Set when some phase's expected graph is effectively disconnected
  // (lambda_2 <= 1e-10); alpha_range refuses such inputs.
  bool disconnected_phase = false;
};

LambdaZeta lambda_zeta(const DynamicGraphSet& dset, const BudgetSchedule& sched);

// Feasible hyperparameter window derived from (lambda_min, lambda_max, zeta)
// and the free parameter k.  Valid for k above k_threshold(); alpha in
// (alpha_min, alpha_max) admits averaging weights up to omega_max(alpha).
struct ParamRange {
  double k_free = 0.0;
  double k_threshold = 0.0;
  double alpha_min = 0.0;
  double alpha_max = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double zeta = 0.0;
  int node_count = 0;

  double omega_max(double alpha) const;
};

// Lower bound that k_free must exceed: max{1, 8 zeta / lambda_min^2 - 1,
// lambda_max^2 / (2 zeta)}; the last term is dropped when zeta == 0.
double k_threshold(const LambdaZeta& lz);

ParamRange alpha_range(const LambdaZeta& lz, double k_free);

// How leaders are drawn when estimating the mixing spectrum.  Leader choice
// in the protocol is state-dependent; for spectral estimates any
// neighborhood-respecting distribution is admissible, so leaders are drawn
// uniformly from each node's closed neighborhood in the active graph.
enum class LeaderPolicy { uniform_neighborhood, self_only };

struct RhoParams {
  double alpha = 0.0;
  double omega_n = 0.0;
  double omega_tau = 0.0;
  LeaderPolicy policy = LeaderPolicy::uniform_neighborhood;
};

// Contraction factor of the expected mixing step.  e1 = ||E[W~ (I-J) W~^T]||
// and e2 = ||E[W~ W~^T]|| measured on the consensus-orthogonal subspace
// (the all-ones direction carries weight exactly 1 for any left-stochastic
// mixing and says nothing about contraction); rho = max(e1, e2) over phases.
struct SpectralReport {
  double rho = 0.0;
  double e1_norm = 0.0;
  double e2_norm = 0.0;
  int samples = 0;
  double std_err = 0.0;
  int argmax_phase = 0;
  std::uint64_t seed = 0;
};

SpectralReport estimate_rho(const DynamicGraphSet& dset,
                            const BudgetSchedule& sched, const RhoParams& params,
                            int samples, std::uint64_t seed);

// Monte Carlo check of the product-contraction property: for random unit-
// Frobenius B, mean ||B (prod_k W~(k)) (I-J)||_F^2 <= rho^n + 3 se.
struct ContractionReport {
  double empirical_mean = 0.0;
  double rho_power = 0.0;
  double std_err = 0.0;
  int n_products = 0;
  int trials = 0;
  bool pass = false;

  double margin() const { return rho_power + 3.0 * std_err - empirical_mean; }
};

ContractionReport check_contraction(const DynamicGraphSet& dset,
                                    const BudgetSchedule& sched,
                                    const RhoParams& params, double rho,
                                    int n_products, int trials,
                                    std::uint64_t seed);

// Spectral norm of a symmetric matrix by power iteration (residual tolerance
// 1e-10).  Falls back to a dense eigensolve for small matrices if the
// iteration stalls; larger stalled problems are an error.
double spectral_norm_symmetric(const Eigen::MatrixXd& sym, double tol = 1e-10,
                               int max_iter = 10000);

// One sampled effective mixing matrix for the given phase (1-based phase
// round p+1), drawing matching activations and leaders from rng.
Eigen::MatrixXd sample_effective_mixing(const DynamicGraphSet& dset,
                                        const BudgetSchedule& sched,
                                        const RhoParams& params, long round,
                                        Rng& rng);

}  // namespace aldsgd
