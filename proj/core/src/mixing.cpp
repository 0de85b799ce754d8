#include "aldsgd/mixing.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace aldsgd {

BudgetSchedule BudgetSchedule::uniform(const DynamicGraphSet& dset,
                                       double budget) {
  if (budget <= 0.0 || budget > 1.0)
    throw std::invalid_argument("communication budget must be in (0, 1]");
  BudgetSchedule sched;
  sched.budget = budget;
  for (const auto& decomposition : dset.decompositions)
    sched.probabilities.emplace_back(decomposition.size(), budget);
  return sched;
}

int phase_index(long round, int graph_count) {
  const long r = round % graph_count;
  return r == 0 ? graph_count - 1 : static_cast<int>(r) - 1;
}

SampledTopology sample_topology(const DynamicGraphSet& dset, long round,
                                const BudgetSchedule& sched, Rng& rng) {
  if (round < 1) throw std::invalid_argument("round index starts at 1");
  SampledTopology out;
  out.phase = phase_index(round, dset.graph_count());
  const auto& matchings = dset.decompositions[out.phase];
  const auto& probs = sched.probabilities[out.phase];
  if (probs.size() != matchings.size())
    throw std::invalid_argument("schedule does not match decomposition");
  for (std::size_t j = 0; j < matchings.size(); ++j) {
    if (rng.bernoulli(probs[j]))
      out.active_edges.insert(out.active_edges.end(),
                              matchings[j].edges.begin(),
                              matchings[j].edges.end());
  }
  std::sort(out.active_edges.begin(), out.active_edges.end());
  out.laplacian = laplacian_of_edges(dset.node_count(), out.active_edges);
  return out;
}

Eigen::MatrixXd sample_laplacian(const DynamicGraphSet& dset, long round,
                                 const BudgetSchedule& sched, Rng& rng) {
  return sample_topology(dset, round, sched, rng).laplacian;
}

MixingMatrix base_weight_matrix(const Eigen::MatrixXd& lap, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
  const auto m = lap.rows();
  MixingMatrix w;
  w.kind = MixingKind::base;
  w.entries.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      w.entries(i, j) = (i == j ? 1.0 : 0.0) - alpha * lap(i, j);
  w.negative_weights = alpha * lap.diagonal().maxCoeff() > 1.0;
  return w;
}

std::vector<std::vector<int>> closed_neighborhoods(
    int m, const std::vector<Edge>& edges) {
  std::vector<std::vector<int>> sets(m);
  for (int i = 0; i < m; ++i) sets[i].push_back(i);
  for (const auto& [u, v] : edges) {
    sets[u].push_back(v);
    sets[v].push_back(u);
  }
  for (auto& set : sets) std::sort(set.begin(), set.end());
  return sets;
}

Eigen::MatrixXd selection_matrix(
    const std::vector<int>& leaders,
    const std::vector<std::vector<int>>& neighbor_sets) {
  const int m = static_cast<int>(leaders.size());
  Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const int leader = leaders[i];
    if (leader < 0 || leader >= m)
      throw std::invalid_argument("leader index out of range");
    const auto& nbrs = neighbor_sets[i];
    if (!std::binary_search(nbrs.begin(), nbrs.end(), leader))
      throw std::invalid_argument("leader outside closed neighborhood");
    sel(leader, i) = 1.0;
  }
  return sel;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> selection_matrices(
    const std::vector<std::pair<int, int>>& leaders,
    const std::vector<std::vector<int>>& neighbor_sets) {
  std::vector<int> best(leaders.size()), maxdeg(leaders.size());
  for (std::size_t i = 0; i < leaders.size(); ++i) {
    best[i] = leaders[i].first;
    maxdeg[i] = leaders[i].second;
  }
  return {selection_matrix(best, neighbor_sets),
          selection_matrix(maxdeg, neighbor_sets)};
}

MixingMatrix effective_mixing(const MixingMatrix& base,
                              const Eigen::MatrixXd& a_best,
                              const Eigen::MatrixXd& a_maxdeg, double omega_n,
                              double omega_tau) {
  if (omega_n < 0.0 || omega_tau < 0.0)
    throw std::invalid_argument("averaging weights must be nonnegative");
  if (omega_n + omega_tau >= 1.0)
    throw std::invalid_argument("averaging weights must sum below 1");
  MixingMatrix out;
  out.kind = MixingKind::effective;
  out.negative_weights = base.negative_weights;
  out.entries = (1.0 - omega_n - omega_tau) * base.entries +
                omega_n * a_best + omega_tau * a_maxdeg;
  return out;
}

std::string matrix_to_csv(const Eigen::MatrixXd& mat) {
  std::string csv;
  char buf[64];
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    for (Eigen::Index j = 0; j < mat.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", mat(i, j));
      csv += buf;
      csv += (j + 1 == mat.cols()) ? '\n' : ',';
    }
  }
  return csv;
}

}  // namespace aldsgd
