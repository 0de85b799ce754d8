#include "aldsgd/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>
#include <string>

namespace aldsgd {

namespace {

Eigen::MatrixXd centering(int m) {
  return Eigen::MatrixXd::Identity(m, m) -
         Eigen::MatrixXd::Constant(m, m, 1.0 / m);
}

Eigen::MatrixXd expected_matching_sum(const std::vector<Matching>& matchings,
                                      const std::vector<double>& probs, int m,
                                      bool variance_weights) {
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t j = 0; j < matchings.size(); ++j) {
    const double p = probs[j];
    const double w = variance_weights ? p * (1.0 - p) : p;
    if (w == 0.0) continue;
    sum += w * laplacian_of_edges(m, matchings[j].edges);
  }
  return sum;
}

}  // namespace

double spectral_norm_symmetric(const Eigen::MatrixXd& sym, double tol,
                               int max_iter) {
  const auto m = sym.rows();
  Rng rng(0x9d5ec7a11e5u);  // fixed start vector; result is deterministic
  Eigen::VectorXd v(m);
  for (Eigen::Index i = 0; i < m; ++i) v(i) = rng.normal();
  v.normalize();

  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = sym * v;
    const double wn = w.norm();
    if (wn < 1e-300) return 0.0;  // v (numerically) in the kernel of sym^2
    v = w / wn;
    lambda = v.dot(sym * v);
    const double residual = (sym * v - lambda * v).norm();
    if (residual <= tol * std::max(1.0, std::abs(lambda)))
      return std::abs(lambda);
  }
  if (m <= 64) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    return std::max(std::abs(es.eigenvalues().minCoeff()),
                    std::abs(es.eigenvalues().maxCoeff()));
  }
  throw std::runtime_error("power iteration did not converge");
}

LambdaZeta lambda_zeta(const DynamicGraphSet& dset,
                       const BudgetSchedule& sched) {
  const int m = dset.node_count();
  LambdaZeta lz;
  lz.node_count = m;
  lz.lambda_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < dset.graph_count(); ++i) {
    const auto& matchings = dset.decompositions[i];
    const auto& probs = sched.probabilities[i];
    const Eigen::MatrixXd mean_lap =
        expected_matching_sum(matchings, probs, m, false);
    const Eigen::MatrixXd var_lap =
        expected_matching_sum(matchings, probs, m, true);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mean_lap);
    const auto& evals = es.eigenvalues();  // ascending
    lz.lambda_min = std::min(lz.lambda_min, evals(1));
    lz.lambda_max = std::max(lz.lambda_max, evals(m - 1));
    if (evals(1) <= 1e-10) lz.disconnected_phase = true;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esv(var_lap);
    lz.zeta = std::max(lz.zeta, esv.eigenvalues().maxCoeff());
  }
  if (lz.disconnected_phase) lz.lambda_min = 0.0;  // callers must reject
  return lz;
}

double k_threshold(const LambdaZeta& lz) {
  double threshold = 1.0;
  if (lz.lambda_min > 0.0)
    threshold = std::max(threshold,
                         8.0 * lz.zeta / (lz.lambda_min * lz.lambda_min) - 1.0);
  if (lz.zeta > 0.0)
    threshold =
        std::max(threshold, lz.lambda_max * lz.lambda_max / (2.0 * lz.zeta));
  return threshold;
}

double ParamRange::omega_max(double alpha) const {
  return (1.0 - alpha * lambda_min) /
         (2.0 * k_free * std::sqrt(static_cast<double>(node_count)));
}

ParamRange alpha_range(const LambdaZeta& lz, double k_free) {
  if (lz.disconnected_phase || lz.lambda_min <= 1e-10)
    throw std::invalid_argument(
        "expected phase graph is disconnected (lambda_min <= 1e-10)");
  const double lam = lz.lambda_min;
  const double eight = 8.0 * lz.zeta / (lam * lam) - 1.0;
  const double ratio =
      lz.zeta > 0.0 ? lz.lambda_max * lz.lambda_max / (2.0 * lz.zeta) : 0.0;
  if (k_free <= 1.0)
    throw std::invalid_argument("k_free violates bound: k > 1");
  if (k_free <= eight)
    throw std::invalid_argument(
        "k_free violates bound: k > 8*zeta/lambda_min^2 - 1 = " +
        std::to_string(eight));
  if (lz.zeta > 0.0 && k_free <= ratio)
    throw std::invalid_argument(
        "k_free violates bound: k > lambda_max^2/(2*zeta) = " +
        std::to_string(ratio));

  const double k = k_free;
  const double den = (k + 1.0) * (k + 1.0) * lam * lam + 2.0 * k * k * lz.zeta;
  ParamRange range;
  range.k_free = k;
  range.k_threshold = k_threshold(lz);
  range.alpha_min = (k + 1.0) * (k + 1.0) * lam / den;
  range.alpha_max = ((k + 1.0) * (k + 1.0) + k) * lam / den;
  range.lambda_min = lz.lambda_min;
  range.lambda_max = lz.lambda_max;
  range.zeta = lz.zeta;
  range.node_count = lz.node_count;
  return range;
}

Eigen::MatrixXd sample_effective_mixing(const DynamicGraphSet& dset,
                                        const BudgetSchedule& sched,
                                        const RhoParams& params, long round,
                                        Rng& rng) {
  const int m = dset.node_count();
  const SampledTopology active = sample_topology(dset, round, sched, rng);
  const MixingMatrix base = base_weight_matrix(active.laplacian, params.alpha);
  if (params.omega_n == 0.0 && params.omega_tau == 0.0) return base.entries;

  const auto nbrs = closed_neighborhoods(m, active.active_edges);
  std::vector<std::pair<int, int>> leaders(m);
  for (int i = 0; i < m; ++i) {
    if (params.policy == LeaderPolicy::self_only) {
      leaders[i] = {i, i};
    } else {
      const auto& set = nbrs[i];
      leaders[i] = {set[rng.uniform_int(set.size())],
                    set[rng.uniform_int(set.size())]};
    }
  }
  const auto [a_best, a_maxdeg] = selection_matrices(leaders, nbrs);
  return effective_mixing(base, a_best, a_maxdeg, params.omega_n,
                          params.omega_tau)
      .entries;
}

SpectralReport estimate_rho(const DynamicGraphSet& dset,
                            const BudgetSchedule& sched,
                            const RhoParams& params, int samples,
                            std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  const int m = dset.node_count();
  const int n = dset.graph_count();
  const Eigen::MatrixXd center = centering(m);

  SpectralReport report;
  report.samples = samples;
  report.seed = seed;

  Eigen::VectorXd top_vector;
  bool top_is_e1 = true;

  for (int phase = 0; phase < n; ++phase) {
    Eigen::MatrixXd mean_dev = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd mean_gram = Eigen::MatrixXd::Zero(m, m);
    for (int s = 0; s < samples; ++s) {
      Rng rng = stream(seed, "spectral", static_cast<std::uint64_t>(phase),
                       static_cast<std::uint64_t>(s));
      const Eigen::MatrixXd wt =
          sample_effective_mixing(dset, sched, params, phase + 1, rng);
      mean_dev.noalias() += wt * center * wt.transpose();
      mean_gram.noalias() += wt * wt.transpose();
    }
    mean_dev /= samples;
    mean_gram /= samples;

    Eigen::MatrixXd sym_dev = 0.5 * (mean_dev + mean_dev.transpose());
    Eigen::MatrixXd sym_gram_centered =
        center * (0.5 * (mean_gram + mean_gram.transpose())) * center;

    const double e1 = spectral_norm_symmetric(sym_dev);
    const double e2 = spectral_norm_symmetric(sym_gram_centered);
    report.e1_norm = std::max(report.e1_norm, e1);
    report.e2_norm = std::max(report.e2_norm, e2);

    const double phase_rho = std::max(e1, e2);
    if (phase_rho > report.rho || phase == 0) {
      report.rho = phase_rho;
      report.argmax_phase = phase;
      top_is_e1 = e1 >= e2;
      // Top eigenvector of the maximizing estimate, for error propagation.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          top_is_e1 ? sym_dev : sym_gram_centered);
      top_vector = es.eigenvectors().col(m - 1);
    }
  }

  // First-order error: variance of the top-direction quadratic form.
  {
    const int phase = report.argmax_phase;
    double sum = 0.0, sum_sq = 0.0;
    for (int s = 0; s < samples; ++s) {
      Rng rng = stream(seed, "spectral", static_cast<std::uint64_t>(phase),
                       static_cast<std::uint64_t>(s));
      const Eigen::MatrixXd wt =
          sample_effective_mixing(dset, sched, params, phase + 1, rng);
      const double q =
          top_is_e1 ? (center * (wt.transpose() * top_vector)).squaredNorm()
                    : (wt.transpose() * (center * top_vector)).squaredNorm();
      sum += q;
      sum_sq += q * q;
    }
    if (samples > 1) {
      const double mean = sum / samples;
      const double var =
          std::max(0.0, (sum_sq - samples * mean * mean) / (samples - 1));
      report.std_err = std::sqrt(var / samples);
    }
  }
  return report;
}

ContractionReport check_contraction(const DynamicGraphSet& dset,
                                    const BudgetSchedule& sched,
                                    const RhoParams& params, double rho,
                                    int n_products, int trials,
                                    std::uint64_t seed) {
  if (n_products < 0) throw std::invalid_argument("n_products must be >= 0");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  const int m = dset.node_count();
  const Eigen::MatrixXd center = centering(m);

  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng rng = stream(seed, "contraction", static_cast<std::uint64_t>(t));
    Eigen::MatrixXd chain(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) chain(i, j) = rng.normal();
    chain /= chain.norm();  // unit Frobenius
    // J W~ (I-J) == 0 for left-stochastic W~, so projecting after every
    // factor computes the same ||B (prod W~) (I-J)||_F^2 while keeping the
    // iterate at the contracted scale (no rounding-noise floor from the
    // consensus component of B).
    for (int k = 1; k <= n_products; ++k) {
      const Eigen::MatrixXd wt =
          sample_effective_mixing(dset, sched, params, k, rng);
      chain = (chain * wt) * center;
    }
    const double value =
        n_products == 0 ? (chain * center).squaredNorm() : chain.squaredNorm();
    sum += value;
    sum_sq += value * value;
  }

  ContractionReport report;
  report.n_products = n_products;
  report.trials = trials;
  report.empirical_mean = sum / trials;
  report.rho_power = std::pow(rho, n_products);
  if (trials > 1) {
    const double var = std::max(
        0.0, (sum_sq - trials * report.empirical_mean * report.empirical_mean) /
                 (trials - 1));
    report.std_err = std::sqrt(var / trials);
  }
  report.pass =
      report.empirical_mean <= report.rho_power + 3.0 * report.std_err;
  return report;
}

}  // namespace aldsgd
