// Independent reference computations for tests: dense eigensolves, BFS
// connectivity, finite differences, least-squares slopes.  Nothing here may
// call into the implementation paths it is used to check.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <functional>
#include <queue>
#include <utility>
#include <vector>

namespace oracle {

// Ascending eigenvalues of a symmetric matrix.
inline Eigen::VectorXd sym_eigenvalues(const Eigen::MatrixXd& mat) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (mat + mat.transpose()));
  return es.eigenvalues();
}

inline double spectral_norm_dense(const Eigen::MatrixXd& mat) {
  const Eigen::VectorXd evals = sym_eigenvalues(mat);
  return std::max(std::abs(evals(0)), std::abs(evals(evals.size() - 1)));
}

// Largest squared eigenvalue of a symmetric doubly stochastic matrix
// restricted to the consensus-orthogonal subspace.
inline double gossip_rho_dense(const Eigen::MatrixXd& w) {
  const auto m = w.rows();
  const Eigen::MatrixXd center =
      Eigen::MatrixXd::Identity(m, m) - Eigen::MatrixXd::Constant(m, m, 1.0 / m);
  return spectral_norm_dense(center * w * w * center);
}

inline bool bfs_connected(int m, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<int>> adjacency(m);
  for (const auto& [u, v] : edges) {
    adjacency[u].push_back(v);
    adjacency[v].push_back(u);
  }
  std::vector<char> seen(m, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int visited = 1;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (int w : adjacency[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++visited;
        frontier.push(w);
      }
  }
  return visited == m;
}

inline bool is_matching(const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> touched;
  for (const auto& [u, v] : edges) {
    touched.push_back(u);
    touched.push_back(v);
  }
  std::sort(touched.begin(), touched.end());
  return std::adjacent_find(touched.begin(), touched.end()) == touched.end();
}

inline Eigen::VectorXd central_diff_grad(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index t = 0; t < x.size(); ++t) {
    probe(t) = x(t) + h;
    const double hi = f(probe);
    probe(t) = x(t) - h;
    const double lo = f(probe);
    probe(t) = x(t);
    grad(t) = (hi - lo) / (2.0 * h);
  }
  return grad;
}

// Least-squares slope of y over x.
inline double fit_slope(const std::vector<double>& xs,
                        const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace oracle
