#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "aldsgd/rng.hpp"

namespace aldsgd {

enum class ProblemKind { quadratic, logistic, mlp };

struct PartitionSpec {
  enum class Mode { iid, label_skew };
  Mode mode = Mode::iid;
  double skew = 0.0;  // fraction of each shard drawn from the worker's region
};

// Desk-scale synthetic objectives.  Quadratics have exact curvature
// constants and a closed-form optimum; logistic regression adds realistic
// sampling noise on a Gaussian-mixture feature space; the tanh MLP covers
// the nonconvex case.  Worker heterogeneity comes from region skew: each
// worker owns one mixture component and label_skew(s) concentrates a
// fraction s of its shard there.
struct ProblemSpec {
  ProblemKind kind = ProblemKind::quadratic;
  int dim = 2;          // parameter dim (quadratic/logistic); input dim (mlp)
  int n_samples = 1024;  // total training samples across workers
  int heldout = 256;     // global held-out evaluation samples
  PartitionSpec partition;
  int batch_size = 8;
  double cluster_scale = 2.0;  // spread of the per-worker region centers
  double sample_spread = 1.0;  // sample noise around a region center
  double q_min_eig = 0.5;      // quadratic curvature eigenvalue range
  double q_max_eig = 1.5;
  double ridge = 1e-3;  // logistic l2 term
  int hidden = 8;       // mlp hidden width
  double noise = 0.05;  // mlp teacher observation noise
  std::optional<std::uint64_t> seed;  // defaults to a stream of the run seed
};

struct GradEval {
  Eigen::VectorXd grad;
  double loss = 0.0;
};

// Measured (or exact, where available) constants of a problem instance:
// gradient Lipschitz constant, objective Lipschitz constant over the visited
// region, minibatch gradient variance, worker-heterogeneity bound, and the
// largest observed distance to a leader.
struct ConstantEstimates {
  double l_smooth = 0.0;
  double beta_lip = 0.0;
  double sigma_sq = 0.0;
  double zeta_sq = 0.0;
  double delta_sq = 0.0;
};

// Parameter snapshots collected along a run (columns = workers), plus the
// running maximum of squared distances to the selected leaders.
struct TrajectorySample {
  std::vector<Eigen::MatrixXd> states;
  double delta_sq_max = 0.0;
};

class Problem {
 public:
  Problem(ProblemSpec spec, int workers, std::uint64_t seed);

  const ProblemSpec& spec() const { return spec_; }
  ProblemKind kind() const { return spec_.kind; }
  int worker_count() const { return workers_; }
  int param_dim() const { return param_dim_; }
  int shard_size(int worker) const;

  // Uniform-with-replacement batch indices into the worker's shard.
  std::vector<int> draw_batch(int worker, int size, Rng& rng) const;

  // Minibatch gradient and training loss at x.  A batch covering the whole
  // shard reproduces the exact local gradient.
  GradEval stoch_grad(int worker, const Eigen::VectorXd& x,
                      const std::vector<int>& batch) const;

  Eigen::VectorXd full_grad(int worker, const Eigen::VectorXd& x) const;
  double local_loss(int worker, const Eigen::VectorXd& x) const;

  // || (1/m) sum_i grad F_i(x) ||^2 over full local data.
  double global_grad_norm_sq(const Eigen::VectorXd& x) const;
  double global_loss(const Eigen::VectorXd& x) const;

  // Per-model evaluation metric: squared distance to the global optimum for
  // quadratics, held-out loss otherwise.
  double eval_loss(const Eigen::VectorXd& x) const;

  std::optional<double> f_star() const { return f_star_; }
  const std::optional<Eigen::VectorXd>& x_star() const { return x_star_; }
  // Exact max curvature for quadratics.
  std::optional<double> l_smooth_exact() const { return l_smooth_exact_; }

  ConstantEstimates estimate_constants(const TrajectorySample& traj,
                                       std::uint64_t seed,
                                       int sigma_draws = 400) const;

 private:
  struct QuadraticWorker {
    Eigen::MatrixXd curvature;   // SPD
    Eigen::VectorXd center;      // shard mean
    double offset = 0.0;         // mean point-to-center quadratic residual
    Eigen::MatrixXd points;      // dim x shard_size
    double max_eig = 0.0;
  };
  struct DataWorker {
    Eigen::MatrixXd features;  // input_dim x shard_size
    Eigen::VectorXd labels;
  };

  void build_quadratic(std::uint64_t seed);
  void build_data_driven(std::uint64_t seed);

  GradEval eval_batch(int worker, const Eigen::VectorXd& x,
                      const int* idx, int count) const;

  double mlp_forward(const Eigen::VectorXd& theta, const Eigen::VectorXd& u,
                     Eigen::VectorXd* hidden) const;
  void mlp_backprop(const Eigen::VectorXd& theta, const Eigen::VectorXd& u,
                    double residual, Eigen::VectorXd& grad_acc) const;

  ProblemSpec spec_;
  int workers_ = 0;
  int param_dim_ = 0;
  std::vector<int> shard_sizes_;

  std::vector<QuadraticWorker> quads_;
  std::vector<DataWorker> shards_;
  Eigen::MatrixXd heldout_features_;
  Eigen::VectorXd heldout_labels_;
  Eigen::VectorXd teacher_;  // logistic truth / mlp teacher parameters

  std::optional<double> f_star_;
  std::optional<Eigen::VectorXd> x_star_;
  std::optional<double> l_smooth_exact_;
};

Problem make_problem(const ProblemSpec& spec, int workers, std::uint64_t seed);

}  // namespace aldsgd
