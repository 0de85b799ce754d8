#include "aldsgd/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace aldsgd {

namespace {

// Chunked parallel-for; each index is processed exactly once and workers
// touch disjoint outputs, so scheduling cannot change results.
template <typename Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  const int chunk = (count + jobs - 1) / jobs;
  for (int t = 0; t < jobs; ++t) {
    const int begin = t * chunk;
    const int end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] {
      for (int i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

void HyperParams::validate() const {
  if (gamma <= 0.0) throw std::invalid_argument("learning rate must be > 0");
  if (lambda_n < 0.0 || lambda_tau < 0.0)
    throw std::invalid_argument("pulling coefficients must be >= 0");
  if (omega_n < 0.0 || omega_tau < 0.0)
    throw std::invalid_argument("averaging weights must be >= 0");
  if (omega_n + omega_tau >= 1.0)
    throw std::invalid_argument("averaging weights must sum below 1");
  if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  if (budget <= 0.0 || budget > 1.0)
    throw std::invalid_argument("budget must be in (0, 1]");
  if (n_graphs < 1) throw std::invalid_argument("need at least one graph");
}

double HyperParams::gamma_at(long round) const {
  double rate = gamma;
  for (const auto& [at, multiplier] : lr_schedule)
    if (round >= at) rate *= multiplier;
  return rate;
}

Eigen::MatrixXd SystemState::stacked() const {
  Eigen::MatrixXd x(dim(), worker_count());
  for (int i = 0; i < worker_count(); ++i) x.col(i) = workers[i].params;
  return x;
}

std::pair<int, int> select_leaders(
    int node, const std::vector<std::vector<int>>& closed_nbrs,
    const std::vector<WorkerState>& workers) {
  const auto& candidates = closed_nbrs[node];
  int best = candidates.front();
  int maxdeg = candidates.front();
  for (int c : candidates) {
    if (workers[c].last_loss < workers[best].last_loss) best = c;
    if (workers[c].degree > workers[maxdeg].degree) maxdeg = c;
  }
  return {best, maxdeg};  // candidates ascend, so ties pick the lowest index
}

Eigen::VectorXd corrective_step(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& grad,
                                const Eigen::VectorXd& x_best,
                                const Eigen::VectorXd& x_maxdeg, double gamma,
                                double lambda_n, double lambda_tau) {
  Eigen::VectorXd half = x - gamma * grad;
  if (lambda_n != 0.0) half -= (gamma * lambda_n) * (x - x_best);
  if (lambda_tau != 0.0) half -= (gamma * lambda_tau) * (x - x_maxdeg);
  return half;
}

Eigen::VectorXd leader_average(int node,
                               const std::vector<WorkerState>& workers,
                               const Eigen::VectorXd& x_half,
                               const Eigen::MatrixXd& w_base,
                               const Eigen::VectorXd& x_best,
                               const Eigen::VectorXd& x_maxdeg, double omega_n,
                               double omega_tau) {
  const int m = static_cast<int>(workers.size());
  Eigen::VectorXd gossip = Eigen::VectorXd::Zero(x_half.size());
  for (int j = 0; j < m; ++j) {
    const double weight = w_base(node, j);
    if (j == node) {
      gossip += weight * x_half;
    } else if (weight != 0.0) {
      gossip += weight * workers[j].params;
    }
  }
  Eigen::VectorXd next = (1.0 - omega_n - omega_tau) * gossip;
  if (omega_n != 0.0) next += omega_n * x_best;
  if (omega_tau != 0.0) next += omega_tau * x_maxdeg;
  return next;
}

SystemState round(const SystemState& state, const HyperParams& hp,
                  const DynamicGraphSet& dset, const BudgetSchedule& sched,
                  const Problem& problem, std::uint64_t seed, int jobs,
                  RoundStats* stats, RoundTrace* trace) {
  hp.validate();
  const int m = state.worker_count();
  const long k = state.round + 1;
  const double gamma_k = hp.gamma_at(k);

  // (1) stochastic gradients and fresh minibatch losses at x_k
  std::vector<GradEval> grads(m);
  parallel_for(m, jobs, [&](int i) {
    Rng rng = stream(seed, "batch", static_cast<std::uint64_t>(k),
                     static_cast<std::uint64_t>(i));
    const auto batch = problem.draw_batch(i, problem.spec().batch_size, rng);
    grads[i] = problem.stoch_grad(i, state.workers[i].params, batch);
  });

  // (2) this round's active links
  Rng lap_rng = stream(seed, "laplacian", static_cast<std::uint64_t>(k));
  const SampledTopology active =
      sample_topology(dset, k + hp.start_phase, sched, lap_rng);
  const MixingMatrix w_base = base_weight_matrix(active.laplacian, hp.alpha);
  const auto closed_nbrs =
      closed_neighborhoods(m, active.active_edges);

  // (3) refresh degrees and losses; both feed leader selection
  SystemState snapshot = state;
  for (int i = 0; i < m; ++i) {
    snapshot.workers[i].last_loss = grads[i].loss;
    snapshot.workers[i].degree =
        static_cast<int>(closed_nbrs[i].size()) - 1;
  }

  // (4) leaders per worker on the active graph
  std::vector<std::pair<int, int>> leaders(m);
  for (int i = 0; i < m; ++i)
    leaders[i] = select_leaders(i, closed_nbrs, snapshot.workers);

  // (5)+(6) corrective local step, then leader-weighted averaging against
  // the pre-round snapshot
  SystemState next = snapshot;
  next.round = k;
  double max_leader_dist_sq = 0.0;
  std::vector<double> leader_dist_sq(m, 0.0);
  parallel_for(m, jobs, [&](int i) {
    const Eigen::VectorXd& x = snapshot.workers[i].params;
    const Eigen::VectorXd& x_best = snapshot.workers[leaders[i].first].params;
    const Eigen::VectorXd& x_maxdeg =
        snapshot.workers[leaders[i].second].params;
    leader_dist_sq[i] = std::max((x - x_best).squaredNorm(),
                                 (x - x_maxdeg).squaredNorm());
    const Eigen::VectorXd half =
        corrective_step(x, grads[i].grad, x_best, x_maxdeg, gamma_k,
                        hp.lambda_n, hp.lambda_tau);
    next.workers[i].params =
        leader_average(i, snapshot.workers, half, w_base.entries, x_best,
                       x_maxdeg, hp.omega_n, hp.omega_tau);
  });
  for (int i = 0; i < m; ++i) {
    max_leader_dist_sq = std::max(max_leader_dist_sq, leader_dist_sq[i]);
    if (!next.workers[i].params.allFinite())
      throw DivergenceError("non-finite parameters at round " +
                            std::to_string(k) + ", worker " +
                            std::to_string(i));
  }

  if (stats) {
    stats->max_leader_dist_sq = max_leader_dist_sq;
    stats->max_local_loss = 0.0;
    for (int i = 0; i < m; ++i)
      stats->max_local_loss =
          std::max(stats->max_local_loss, grads[i].loss);
    stats->phase = active.phase;
  }
  if (trace) {
    trace->w_base = w_base.entries;
    trace->gradients.resize(state.dim(), m);
    for (int i = 0; i < m; ++i) trace->gradients.col(i) = grads[i].grad;
    trace->leaders = leaders;
    trace->active_edges = active.active_edges;
    trace->gamma = gamma_k;
  }
  return next;
}

Eigen::VectorXd output_model(const SystemState& state) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(state.dim());
  for (const auto& worker : state.workers) mean += worker.params;
  return mean / state.worker_count();
}

}  // namespace aldsgd
