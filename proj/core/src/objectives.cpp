#include "aldsgd/objectives.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace aldsgd {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// -log p(y | logit), stable for large |logit|.
double logistic_loss(double logit, double label) {
  const double softplus =
      logit > 0.0 ? logit + std::log1p(std::exp(-logit))
                  : std::log1p(std::exp(logit));
  return softplus - label * logit;
}

Eigen::MatrixXd random_rotation(int d, Rng& rng) {
  Eigen::MatrixXd gauss(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) gauss(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  return qr.householderQ();
}

}  // namespace

Problem::Problem(ProblemSpec spec, int workers, std::uint64_t seed)
    : spec_(std::move(spec)), workers_(workers) {
  if (workers_ < 2) throw std::invalid_argument("need at least 2 workers");
  if (spec_.dim < 1) throw std::invalid_argument("dimension must be >= 1");
  if (spec_.n_samples < workers_)
    throw std::invalid_argument("every worker needs a nonempty shard");
  if (spec_.batch_size < 1) throw std::invalid_argument("batch size >= 1");
  if (spec_.partition.mode == PartitionSpec::Mode::label_skew &&
      (spec_.partition.skew < 0.0 || spec_.partition.skew > 1.0))
    throw std::invalid_argument("skew fraction must be in [0, 1]");

  shard_sizes_.resize(workers_);
  for (int i = 0; i < workers_; ++i)
    shard_sizes_[i] = spec_.n_samples / workers_ +
                      (i < spec_.n_samples % workers_ ? 1 : 0);

  const std::uint64_t problem_seed = spec_.seed.value_or(seed);
  switch (spec_.kind) {
    case ProblemKind::quadratic:
      param_dim_ = spec_.dim;
      build_quadratic(problem_seed);
      break;
    case ProblemKind::logistic:
      param_dim_ = spec_.dim;
      build_data_driven(problem_seed);
      break;
    case ProblemKind::mlp:
      param_dim_ = spec_.hidden * spec_.dim + 2 * spec_.hidden + 1;
      build_data_driven(problem_seed);
      break;
  }
}

int Problem::shard_size(int worker) const { return shard_sizes_[worker]; }

void Problem::build_quadratic(std::uint64_t seed) {
  const int d = spec_.dim;
  Rng center_rng = stream(seed, "centers");
  Eigen::MatrixXd region_centers(d, workers_);
  for (int c = 0; c < workers_; ++c)
    for (int t = 0; t < d; ++t)
      region_centers(t, c) = spec_.cluster_scale * center_rng.normal();

  quads_.resize(workers_);
  double l_exact = 0.0;
  for (int i = 0; i < workers_; ++i) {
    auto& w = quads_[i];
    Rng qrng = stream(seed, "curvature", static_cast<std::uint64_t>(i));
    if (spec_.q_min_eig == spec_.q_max_eig) {
      w.curvature = spec_.q_min_eig * Eigen::MatrixXd::Identity(d, d);
      w.max_eig = spec_.q_min_eig;
    } else {
      Eigen::VectorXd eigs(d);
      for (int t = 0; t < d; ++t)
        eigs(t) = spec_.q_min_eig +
                  (spec_.q_max_eig - spec_.q_min_eig) * qrng.uniform();
      const Eigen::MatrixXd rot = random_rotation(d, qrng);
      w.curvature = rot * eigs.asDiagonal() * rot.transpose();
      w.curvature = 0.5 * (w.curvature + w.curvature.transpose()).eval();
      w.max_eig = eigs.maxCoeff();
    }
    l_exact = std::max(l_exact, w.max_eig);

    Rng drng = stream(seed, "data", static_cast<std::uint64_t>(i));
    w.points.resize(d, shard_sizes_[i]);
    for (int s = 0; s < shard_sizes_[i]; ++s) {
      int cluster = i;
      if (spec_.partition.mode == PartitionSpec::Mode::iid ||
          !drng.bernoulli(spec_.partition.skew))
        cluster = static_cast<int>(drng.uniform_int(workers_));
      for (int t = 0; t < d; ++t)
        w.points(t, s) =
            region_centers(t, cluster) + spec_.sample_spread * drng.normal();
    }
    // Accumulate the shard mean in column order, matching eval_batch's
    // full-batch accumulation so exact gradients agree bit for bit.
    w.center = Eigen::VectorXd::Zero(d);
    for (int s = 0; s < shard_sizes_[i]; ++s) w.center += w.points.col(s);
    w.center /= shard_sizes_[i];
    w.offset = 0.0;
    for (int s = 0; s < shard_sizes_[i]; ++s) {
      const Eigen::VectorXd dev = w.points.col(s) - w.center;
      w.offset += 0.5 * dev.dot(w.curvature * dev);
    }
    w.offset /= shard_sizes_[i];
  }
  l_smooth_exact_ = l_exact;

  // Global optimum of (1/m) sum_i F_i: solve (sum Q_i) x = sum Q_i b_i.
  Eigen::MatrixXd q_sum = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  for (const auto& w : quads_) {
    q_sum += w.curvature;
    rhs += w.curvature * w.center;
  }
  const Eigen::VectorXd opt = q_sum.ldlt().solve(rhs);
  x_star_ = opt;
  double f_opt = 0.0;
  for (const auto& w : quads_) {
    const Eigen::VectorXd dev = opt - w.center;
    f_opt += 0.5 * dev.dot(w.curvature * dev) + w.offset;
  }
  f_star_ = f_opt / workers_;
}

void Problem::build_data_driven(std::uint64_t seed) {
  const int in_dim = spec_.dim;
  Rng center_rng = stream(seed, "centers");
  Eigen::MatrixXd region_centers(in_dim, workers_);
  for (int c = 0; c < workers_; ++c)
    for (int t = 0; t < in_dim; ++t)
      region_centers(t, c) = spec_.cluster_scale * center_rng.normal();

  Rng teacher_rng = stream(seed, "teacher");
  if (spec_.kind == ProblemKind::logistic) {
    teacher_.resize(in_dim);
    for (int t = 0; t < in_dim; ++t) teacher_(t) = teacher_rng.normal();
    teacher_ *= 2.0 / teacher_.norm();
  } else {
    teacher_.resize(param_dim_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (int t = 0; t < param_dim_; ++t)
      teacher_(t) = teacher_rng.normal() * scale;
  }

  auto draw_sample = [&](Rng& rng, int cluster, Eigen::VectorXd& f) {
    for (int t = 0; t < in_dim; ++t)
      f(t) = region_centers(t, cluster) + spec_.sample_spread * rng.normal();
  };
  auto label_of = [&](const Eigen::VectorXd& f, Rng& rng) {
    if (spec_.kind == ProblemKind::logistic)
      return rng.bernoulli(sigmoid(teacher_.dot(f))) ? 1.0 : 0.0;
    return mlp_forward(teacher_, f, nullptr) + spec_.noise * rng.normal();
  };

  shards_.resize(workers_);
  Eigen::VectorXd feat(in_dim);
  for (int i = 0; i < workers_; ++i) {
    Rng drng = stream(seed, "data", static_cast<std::uint64_t>(i));
    auto& shard = shards_[i];
    shard.features.resize(in_dim, shard_sizes_[i]);
    shard.labels.resize(shard_sizes_[i]);
    for (int s = 0; s < shard_sizes_[i]; ++s) {
      int cluster = i;
      if (spec_.partition.mode == PartitionSpec::Mode::iid ||
          !drng.bernoulli(spec_.partition.skew))
        cluster = static_cast<int>(drng.uniform_int(workers_));
      draw_sample(drng, cluster, feat);
      shard.features.col(s) = feat;
      shard.labels(s) = label_of(feat, drng);
    }
  }

  Rng hrng = stream(seed, "heldout");
  heldout_features_.resize(in_dim, spec_.heldout);
  heldout_labels_.resize(spec_.heldout);
  for (int s = 0; s < spec_.heldout; ++s) {
    const int cluster = static_cast<int>(hrng.uniform_int(workers_));
    draw_sample(hrng, cluster, feat);
    heldout_features_.col(s) = feat;
    heldout_labels_(s) = label_of(feat, hrng);
  }
}

std::vector<int> Problem::draw_batch(int worker, int size, Rng& rng) const {
  const int n = shard_sizes_[worker];
  if (size >= n) {  // full-batch mode: exact local gradient, no resampling
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  std::vector<int> batch(size);
  for (int s = 0; s < size; ++s)
    batch[s] =
        static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
  return batch;
}

double Problem::mlp_forward(const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& u,
                            Eigen::VectorXd* hidden) const {
  const int h = spec_.hidden, in = spec_.dim;
  Eigen::Map<const Eigen::MatrixXd> w1(theta.data(), h, in);
  Eigen::Map<const Eigen::VectorXd> b1(theta.data() + h * in, h);
  Eigen::Map<const Eigen::VectorXd> w2(theta.data() + h * in + h, h);
  const double b2 = theta(param_dim_ - 1);
  Eigen::VectorXd act = (w1 * u + b1).array().tanh();
  const double out = w2.dot(act) + b2;
  if (hidden) *hidden = std::move(act);
  return out;
}

void Problem::mlp_backprop(const Eigen::VectorXd& theta,
                           const Eigen::VectorXd& u, double residual,
                           Eigen::VectorXd& grad_acc) const {
  const int h = spec_.hidden, in = spec_.dim;
  Eigen::VectorXd act;
  mlp_forward(theta, u, &act);
  Eigen::Map<const Eigen::VectorXd> w2(theta.data() + h * in + h, h);

  Eigen::Map<Eigen::MatrixXd> g_w1(grad_acc.data(), h, in);
  Eigen::Map<Eigen::VectorXd> g_b1(grad_acc.data() + h * in, h);
  Eigen::Map<Eigen::VectorXd> g_w2(grad_acc.data() + h * in + h, h);

  const Eigen::VectorXd delta =
      residual * (w2.array() * (1.0 - act.array().square())).matrix();
  g_w1.noalias() += delta * u.transpose();
  g_b1 += delta;
  g_w2 += residual * act;
  grad_acc(param_dim_ - 1) += residual;
}

GradEval Problem::eval_batch(int worker, const Eigen::VectorXd& x,
                             const int* idx, int count) const {
  GradEval out;
  out.grad = Eigen::VectorXd::Zero(param_dim_);
  switch (spec_.kind) {
    case ProblemKind::quadratic: {
      const auto& w = quads_[worker];
      Eigen::VectorXd mean_point = Eigen::VectorXd::Zero(spec_.dim);
      for (int s = 0; s < count; ++s) {
        const Eigen::VectorXd dev = x - w.points.col(idx[s]);
        out.loss += 0.5 * dev.dot(w.curvature * dev);
        mean_point += w.points.col(idx[s]);
      }
      mean_point /= count;
      out.loss /= count;
      out.grad = w.curvature * (x - mean_point);
      break;
    }
    case ProblemKind::logistic: {
      const auto& shard = shards_[worker];
      for (int s = 0; s < count; ++s) {
        const auto f = shard.features.col(idx[s]);
        const double y = shard.labels(idx[s]);
        const double logit = x.dot(f);
        out.loss += logistic_loss(logit, y);
        out.grad += (sigmoid(logit) - y) * f;
      }
      out.loss /= count;
      out.grad /= count;
      out.loss += 0.5 * spec_.ridge * x.squaredNorm();
      out.grad += spec_.ridge * x;
      break;
    }
    case ProblemKind::mlp: {
      const auto& shard = shards_[worker];
      for (int s = 0; s < count; ++s) {
        const Eigen::VectorXd u = shard.features.col(idx[s]);
        const double residual =
            mlp_forward(x, u, nullptr) - shard.labels(idx[s]);
        out.loss += 0.5 * residual * residual;
        mlp_backprop(x, u, residual, out.grad);
      }
      out.loss /= count;
      out.grad /= count;
      break;
    }
  }
  return out;
}

GradEval Problem::stoch_grad(int worker, const Eigen::VectorXd& x,
                             const std::vector<int>& batch) const {
  if (x.size() != param_dim_)
    throw std::invalid_argument("parameter dimension mismatch");
  if (batch.empty()) throw std::invalid_argument("empty batch");
  for (int idx : batch)
    if (idx < 0 || idx >= shard_sizes_[worker])
      throw std::invalid_argument("batch index out of shard range");
  return eval_batch(worker, x, batch.data(), static_cast<int>(batch.size()));
}

Eigen::VectorXd Problem::full_grad(int worker, const Eigen::VectorXd& x) const {
  if (spec_.kind == ProblemKind::quadratic)
    return quads_[worker].curvature * (x - quads_[worker].center);
  std::vector<int> all(shard_sizes_[worker]);
  std::iota(all.begin(), all.end(), 0);
  return eval_batch(worker, x, all.data(), static_cast<int>(all.size())).grad;
}

double Problem::local_loss(int worker, const Eigen::VectorXd& x) const {
  if (spec_.kind == ProblemKind::quadratic) {
    const auto& w = quads_[worker];
    const Eigen::VectorXd dev = x - w.center;
    return 0.5 * dev.dot(w.curvature * dev) + w.offset;
  }
  std::vector<int> all(shard_sizes_[worker]);
  std::iota(all.begin(), all.end(), 0);
  return eval_batch(worker, x, all.data(), static_cast<int>(all.size())).loss;
}

double Problem::global_grad_norm_sq(const Eigen::VectorXd& x) const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(param_dim_);
  for (int i = 0; i < workers_; ++i) sum += full_grad(i, x);
  sum /= workers_;
  return sum.squaredNorm();
}

double Problem::global_loss(const Eigen::VectorXd& x) const {
  double total = 0.0;
  for (int i = 0; i < workers_; ++i) total += local_loss(i, x);
  return total / workers_;
}

double Problem::eval_loss(const Eigen::VectorXd& x) const {
  if (spec_.kind == ProblemKind::quadratic)
    return (x - *x_star_).squaredNorm();
  double total = 0.0;
  for (int s = 0; s < heldout_features_.cols(); ++s) {
    if (spec_.kind == ProblemKind::logistic) {
      total += logistic_loss(x.dot(heldout_features_.col(s)),
                             heldout_labels_(s));
    } else {
      const double r =
          mlp_forward(x, heldout_features_.col(s), nullptr) - heldout_labels_(s);
      total += 0.5 * r * r;
    }
  }
  return total / static_cast<double>(heldout_features_.cols());
}

ConstantEstimates Problem::estimate_constants(const TrajectorySample& traj,
                                              std::uint64_t seed,
                                              int sigma_draws) const {
  if (traj.states.empty())
    throw std::invalid_argument("trajectory sample is empty");
  ConstantEstimates est;
  est.delta_sq = traj.delta_sq_max;

  // Points of interest: every worker column plus the column mean.
  std::vector<Eigen::VectorXd> points;
  for (const auto& snapshot : traj.states) {
    for (int i = 0; i < snapshot.cols(); ++i) points.push_back(snapshot.col(i));
    points.push_back(snapshot.rowwise().mean());
  }

  if (l_smooth_exact_) {
    est.l_smooth = *l_smooth_exact_;
  } else {
    Rng rng = stream(seed, "lipschitz");
    for (std::size_t a = 0; a + 1 < points.size(); ++a) {
      const auto& x = points[a];
      const auto& y = points[a + 1];
      const double dist = (x - y).norm();
      if (dist < 1e-12) continue;
      for (int i = 0; i < workers_; ++i)
        est.l_smooth = std::max(
            est.l_smooth, (full_grad(i, x) - full_grad(i, y)).norm() / dist);
    }
    // Random short secants around visited points sharpen the estimate.
    for (int trial = 0; trial < 32 && !points.empty(); ++trial) {
      const auto& x = points[rng.uniform_int(points.size())];
      Eigen::VectorXd y = x;
      for (int t = 0; t < y.size(); ++t) y(t) += 0.1 * rng.normal();
      const double dist = (x - y).norm();
      for (int i = 0; i < workers_; ++i)
        est.l_smooth = std::max(
            est.l_smooth, (full_grad(i, x) - full_grad(i, y)).norm() / dist);
    }
  }

  for (const auto& x : points) {
    Eigen::VectorXd mean_grad = Eigen::VectorXd::Zero(param_dim_);
    std::vector<Eigen::VectorXd> grads(workers_);
    for (int i = 0; i < workers_; ++i) {
      grads[i] = full_grad(i, x);
      est.beta_lip = std::max(est.beta_lip, grads[i].norm());
      mean_grad += grads[i];
    }
    mean_grad /= workers_;
    double hetero = 0.0;
    for (int i = 0; i < workers_; ++i)
      hetero += (grads[i] - mean_grad).squaredNorm();
    est.zeta_sq = std::max(est.zeta_sq, hetero / workers_);
  }

  // Minibatch variance, averaged over draws, maximized over probe points.
  Rng srng = stream(seed, "sigma");
  const int probes = std::min<int>(8, static_cast<int>(points.size()));
  for (int probe = 0; probe < probes; ++probe) {
    const auto& x = points[srng.uniform_int(points.size())];
    const int worker = static_cast<int>(srng.uniform_int(workers_));
    const Eigen::VectorXd exact = full_grad(worker, x);
    double acc = 0.0;
    for (int rep = 0; rep < sigma_draws; ++rep) {
      const auto batch = draw_batch(worker, spec_.batch_size, srng);
      acc += (stoch_grad(worker, x, batch).grad - exact).squaredNorm();
    }
    est.sigma_sq = std::max(est.sigma_sq, acc / sigma_draws);
  }
  return est;
}

Problem make_problem(const ProblemSpec& spec, int workers, std::uint64_t seed) {
  return Problem(spec, workers, seed);
}

}  // namespace aldsgd
