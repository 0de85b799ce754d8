#include <doctest.h>

#include <cmath>

#include "aldsgd/protocol.hpp"
#include "oracles.hpp"

using namespace aldsgd;

namespace {

ProblemSpec quick_quadratic(int d = 5) {
  ProblemSpec spec;
  spec.kind = ProblemKind::quadratic;
  spec.dim = d;
  spec.n_samples = 128;
  spec.batch_size = 4;
  return spec;
}

SystemState gaussian_state(int m, int d, std::uint64_t seed) {
  SystemState state;
  state.workers.resize(m);
  for (int i = 0; i < m; ++i) {
    Rng rng = stream(seed, "init", i);
    state.workers[i].params.resize(d);
    for (int t = 0; t < d; ++t) state.workers[i].params(t) = rng.normal();
  }
  return state;
}

// Closed-form one-round update from the traced internals:
// (1-wN-wT) sum_j W_ij x_j + wN x^N + wT x^T
//   - gamma (1-wN-wT) W_ii [g_i + lN (x_i - x^N) + lT (x_i - x^T)].
Eigen::MatrixXd closed_form_next(const SystemState& before,
                                 const RoundTrace& trace,
                                 const HyperParams& hp) {
  const int m = before.worker_count();
  const Eigen::MatrixXd x = before.stacked();
  Eigen::MatrixXd next(before.dim(), m);
  const double keep = 1.0 - hp.omega_n - hp.omega_tau;
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd mix = Eigen::VectorXd::Zero(before.dim());
    for (int j = 0; j < m; ++j) mix += trace.w_base(i, j) * x.col(j);
    const Eigen::VectorXd x_best = x.col(trace.leaders[i].first);
    const Eigen::VectorXd x_maxdeg = x.col(trace.leaders[i].second);
    next.col(i) = keep * mix + hp.omega_n * x_best + hp.omega_tau * x_maxdeg -
                  trace.gamma * keep * trace.w_base(i, i) *
                      (trace.gradients.col(i) +
                       hp.lambda_n * (x.col(i) - x_best) +
                       hp.lambda_tau * (x.col(i) - x_maxdeg));
  }
  return next;
}

}  // namespace

TEST_CASE("leader selection scans the closed neighborhood") {
  std::vector<WorkerState> workers(4);
  for (int i = 0; i < 4; ++i) {
    workers[i].params = Eigen::VectorXd::Zero(1);
    workers[i].last_loss = 1.0;
    workers[i].degree = 1;
  }
  const Graph star = make_star(4);
  const auto nbrs = closed_neighborhoods(4, star.edges());

  SUBCASE("ties break to the lowest index") {
    CHECK(select_leaders(2, nbrs, workers) == std::pair<int, int>{0, 0});
    CHECK(select_leaders(0, nbrs, workers) == std::pair<int, int>{0, 0});
  }
  SUBCASE("a leaf's max-degree leader is the hub") {
    workers[0].degree = 3;
    workers[2].last_loss = 0.1;
    CHECK(select_leaders(2, nbrs, workers).second == 0);
    CHECK(select_leaders(2, nbrs, workers).first == 2);
  }
  SUBCASE("an isolated node leads itself") {
    const auto isolated = closed_neighborhoods(4, {});
    CHECK(select_leaders(3, isolated, workers) == std::pair<int, int>{3, 3});
  }
}

TEST_CASE("leader selection matches a brute-force scan") {
  Rng rng(77);
  const Graph g(6, {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {3, 5}, {1, 4}, {2, 5}});
  const auto nbrs = closed_neighborhoods(6, g.edges());
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<WorkerState> workers(6);
    for (int i = 0; i < 6; ++i) {
      workers[i].last_loss = rng.uniform();
      workers[i].degree = static_cast<int>(rng.uniform_int(5));
    }
    for (int node = 0; node < 6; ++node) {
      int best = -1, maxdeg = -1;
      for (int c : nbrs[node]) {
        if (best < 0 || workers[c].last_loss < workers[best].last_loss) best = c;
        if (maxdeg < 0 || workers[c].degree > workers[maxdeg].degree)
          maxdeg = c;
      }
      CHECK(select_leaders(node, nbrs, workers) ==
            std::pair<int, int>{best, maxdeg});
    }
  }
}

TEST_CASE("corrective step arithmetic") {
  Eigen::VectorXd x(2), g(2), best(2), maxdeg(2);
  x << 1.0, 0.0;
  g << 0.0, 0.0;
  best << 0.0, 0.0;
  maxdeg << 2.0, 0.0;

  SUBCASE("no pulling reduces to plain SGD") {
    g << 0.5, -1.0;
    const Eigen::VectorXd half = corrective_step(x, g, best, maxdeg, 0.1, 0.0, 0.0);
    CHECK(half == (x - 0.1 * g).eval());
  }
  SUBCASE("fixed point when gradient vanishes and leaders agree") {
    CHECK(corrective_step(x, g, x, x, 0.1, 0.3, 0.2) == x);
  }
  SUBCASE("opposing leaders cancel by symmetry") {
    const Eigen::VectorXd half = corrective_step(x, g, best, maxdeg, 0.1, 0.1, 0.1);
    CHECK(half(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(half(1) == 0.0);
  }
}

TEST_CASE("leader average arithmetic") {
  std::vector<WorkerState> workers(2);
  Eigen::VectorXd x0(1), x1(1);
  x0 << 4.0;
  x1 << -2.0;
  workers[0].params = x0;
  workers[1].params = x1;
  Eigen::MatrixXd w(2, 2);
  w << 0.5, 0.5, 0.5, 0.5;

  SUBCASE("no communication passes the local half-step through") {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd half(1);
    half << 7.0;
    CHECK(leader_average(1, workers, half, eye, x0, x0, 0.0, 0.0) == half);
  }
  SUBCASE("consensus is a fixed point") {
    workers[1].params = x0;
    CHECK(leader_average(0, workers, x0, w, x0, x0, 0.1, 0.1) == x0);
  }
  SUBCASE("two-node formula") {
    Eigen::VectorXd half(1);
    half << 1.0;
    const Eigen::VectorXd next =
        leader_average(1, workers, half, w, x0, x0, 0.1, 0.1);
    // 0.8*(0.5*4 + 0.5*1) + 0.2*4
    CHECK(next(0) == doctest::Approx(2.8).epsilon(1e-15));
  }
}

TEST_CASE("one round composes to the closed-form update") {
  const Problem problem = make_problem(quick_quadratic(), 8, 5);

  HyperParams leader;  // leader pulls over rotating graphs
  leader.gamma = 0.1;
  leader.lambda_n = leader.lambda_tau = 0.1;
  leader.omega_n = leader.omega_tau = 0.1;
  leader.alpha = 0.2;
  leader.budget = 0.5;
  leader.n_graphs = 3;

  HyperParams budgeted = leader;  // no leader terms, budgeted static graph
  budgeted.lambda_n = budgeted.lambda_tau = 0.0;
  budgeted.omega_n = budgeted.omega_tau = 0.0;
  budgeted.n_graphs = 1;

  for (const HyperParams& hp : {leader, budgeted}) {
    const DynamicGraphSet dset = make_dynamic_set(
        make_pendant_ring(8), hp.n_graphs, default_shifts(8, hp.n_graphs));
    const BudgetSchedule sched = BudgetSchedule::uniform(dset, hp.budget);
    SystemState state = gaussian_state(8, problem.param_dim(), 1);
    for (int k = 0; k < 30; ++k) {
      const SystemState before = state;
      RoundTrace trace;
      state = round(state, hp, dset, sched, problem, 99, 1, nullptr, &trace);
      const Eigen::MatrixXd expected = closed_form_next(before, trace, hp);
      CHECK((state.stacked() - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("rounds are invariant to intra-round parallelism") {
  const Problem problem = make_problem(quick_quadratic(), 8, 7);
  const DynamicGraphSet dset =
      make_dynamic_set(make_pendant_ring(8), 3, default_shifts(8, 3));
  const BudgetSchedule sched = BudgetSchedule::uniform(dset, 0.5);
  HyperParams hp;
  hp.gamma = 0.1;
  hp.lambda_n = hp.lambda_tau = 0.1;
  hp.omega_n = hp.omega_tau = 0.1;
  hp.alpha = 0.2;
  hp.budget = 0.5;
  hp.n_graphs = 3;

  SystemState serial = gaussian_state(8, problem.param_dim(), 2);
  SystemState threaded = serial;
  for (int k = 0; k < 20; ++k) {
    serial = round(serial, hp, dset, sched, problem, 123, 1);
    threaded = round(threaded, hp, dset, sched, problem, 123, 4);
    for (int i = 0; i < 8; ++i)
      CHECK(serial.workers[i].params == threaded.workers[i].params);
  }
}

TEST_CASE("averaging keeps iterates inside the coordinate hull") {
  const Problem problem = make_problem(quick_quadratic(), 8, 9);
  const DynamicGraphSet dset =
      make_dynamic_set(make_pendant_ring(8), 3, default_shifts(8, 3));
  const BudgetSchedule sched = BudgetSchedule::uniform(dset, 1.0);
  HyperParams hp;
  hp.gamma = 0.05;
  hp.lambda_n = hp.lambda_tau = 0.1;
  hp.omega_n = hp.omega_tau = 0.1;
  hp.alpha = 0.2;  // alpha * max active degree < 1 keeps W nonnegative
  hp.n_graphs = 3;

  SystemState state = gaussian_state(8, problem.param_dim(), 3);
  for (int k = 0; k < 25; ++k) {
    RoundTrace trace;
    const SystemState before = state;
    state = round(state, hp, dset, sched, problem, 321, 1, nullptr, &trace);
    CHECK_FALSE(base_weight_matrix(laplacian_of_edges(8, trace.active_edges),
                                   hp.alpha)
                    .negative_weights);
    double bound = 0.0;
    for (int i = 0; i < 8; ++i) {
      const Eigen::VectorXd& x = before.workers[i].params;
      const Eigen::VectorXd half = corrective_step(
          x, trace.gradients.col(i),
          before.workers[trace.leaders[i].first].params,
          before.workers[trace.leaders[i].second].params, trace.gamma,
          hp.lambda_n, hp.lambda_tau);
      bound = std::max({bound, x.cwiseAbs().maxCoeff(),
                        half.cwiseAbs().maxCoeff()});
    }
    for (int i = 0; i < 8; ++i)
      CHECK(state.workers[i].params.cwiseAbs().maxCoeff() <= bound + 1e-12);
  }
}

TEST_CASE("start_phase offsets the graph rotation") {
  const Problem problem = make_problem(quick_quadratic(), 8, 15);
  const DynamicGraphSet dset =
      make_dynamic_set(make_pendant_ring(8), 3, default_shifts(8, 3));
  const BudgetSchedule sched = BudgetSchedule::uniform(dset, 1.0);
  HyperParams hp;
  hp.gamma = 0.05;
  hp.alpha = 0.2;
  hp.n_graphs = 3;

  SystemState state = gaussian_state(8, problem.param_dim(), 6);
  for (int offset = 0; offset < 3; ++offset) {
    hp.start_phase = offset;
    RoundStats stats;
    round(state, hp, dset, sched, problem, 11, 1, &stats);
    CHECK(stats.phase == phase_index(1 + offset, 3));
  }
}

TEST_CASE("learning-rate schedule multiplies at the configured rounds") {
  HyperParams hp;
  hp.gamma = 0.4;
  hp.lr_schedule = {{100, 0.1}, {150, 0.1}};
  CHECK(hp.gamma_at(1) == 0.4);
  CHECK(hp.gamma_at(99) == 0.4);
  CHECK(hp.gamma_at(100) == doctest::Approx(0.04));
  CHECK(hp.gamma_at(150) == doctest::Approx(0.004));
}

TEST_CASE("output model averages the workers") {
  SystemState state;
  state.workers.resize(2);
  state.workers[0].params = Eigen::VectorXd::Constant(1, 0.0);
  state.workers[1].params = Eigen::VectorXd::Constant(1, 2.0);
  CHECK(output_model(state)(0) == 1.0);

  std::swap(state.workers[0], state.workers[1]);
  CHECK(output_model(state)(0) == 1.0);
}

TEST_CASE("non-finite parameters abort the round") {
  const Problem problem = make_problem(quick_quadratic(), 4, 13);
  const DynamicGraphSet dset = make_dynamic_set(make_ring(4), 1, {0});
  const BudgetSchedule sched = BudgetSchedule::uniform(dset, 1.0);
  HyperParams hp;
  hp.gamma = 1e160;  // one absurd step overflows the quadratic gradient
  hp.alpha = 0.25;

  SystemState state = gaussian_state(4, problem.param_dim(), 4);
  CHECK_THROWS_AS(
      [&] {
        for (int k = 0; k < 4; ++k)
          state = round(state, hp, dset, sched, problem, 7, 1);
      }(),
      DivergenceError);
}
