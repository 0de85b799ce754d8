#include <benchmark/benchmark.h>

#include <Eigen/Eigenvalues>

#include "aldsgd/spectral.hpp"

using namespace aldsgd;

namespace {

DynamicGraphSet rotated_pendant(int m) {
  return make_dynamic_set(make_pendant_ring(m), 3, default_shifts(m, 3));
}

}  // namespace

static void BM_SampleTopology(benchmark::State& state) {
  const auto dset = rotated_pendant(static_cast<int>(state.range(0)));
  const auto sched = BudgetSchedule::uniform(dset, 0.5);
  Rng rng(1);
  long k = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_topology(dset, k++, sched, rng));
  }
}
BENCHMARK(BM_SampleTopology)->Arg(8)->Arg(32);

static void BM_SampleEffectiveMixing(benchmark::State& state) {
  const auto dset = rotated_pendant(static_cast<int>(state.range(0)));
  const auto sched = BudgetSchedule::uniform(dset, 0.5);
  RhoParams params;
  params.alpha = 0.15;
  params.omega_n = params.omega_tau = 0.05;
  Rng rng(2);
  long k = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        sample_effective_mixing(dset, sched, params, k++, rng));
}
BENCHMARK(BM_SampleEffectiveMixing)->Arg(8)->Arg(32);

static void BM_PowerIteration(benchmark::State& state) {
  const auto m = state.range(0);
  Rng rng(3);
  Eigen::MatrixXd raw(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) raw(i, j) = rng.normal();
  const Eigen::MatrixXd sym = 0.5 * (raw + raw.transpose());
  for (auto _ : state) benchmark::DoNotOptimize(spectral_norm_symmetric(sym));
}
BENCHMARK(BM_PowerIteration)->Arg(8)->Arg(32)->Arg(64);

static void BM_DenseEigensolve(benchmark::State& state) {
  const auto m = state.range(0);
  Rng rng(3);
  Eigen::MatrixXd raw(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) raw(i, j) = rng.normal();
  const Eigen::MatrixXd sym = 0.5 * (raw + raw.transpose());
  for (auto _ : state) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    benchmark::DoNotOptimize(es.eigenvalues());
  }
}
BENCHMARK(BM_DenseEigensolve)->Arg(8)->Arg(32)->Arg(64);

static void BM_EstimateRho(benchmark::State& state) {
  const auto dset = rotated_pendant(8);
  const auto sched = BudgetSchedule::uniform(dset, 0.5);
  RhoParams params;
  params.alpha = 0.13;
  params.omega_n = params.omega_tau = 5e-4;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        estimate_rho(dset, sched, params, static_cast<int>(state.range(0)), 7));
}
BENCHMARK(BM_EstimateRho)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);
