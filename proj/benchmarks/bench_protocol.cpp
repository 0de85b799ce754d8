#include <benchmark/benchmark.h>

#include "aldsgd/engine.hpp"

using namespace aldsgd;

namespace {

ExperimentConfig round_config(int m, int dim, Preset preset) {
  ExperimentConfig config;
  config.preset = preset;
  config.topology.kind = TopologyDesc::Kind::pendant_ring;
  config.topology.m = m;
  config.topology.dynamic_n = preset == Preset::aldsgd ? 3 : 1;
  config.problem.kind = ProblemKind::quadratic;
  config.problem.dim = dim;
  config.problem.n_samples = 64 * m;
  config.problem.batch_size = 16;
  config.hyper.gamma = 0.05;
  config.hyper.alpha = 0.1;
  config.hyper.budget = 0.5;
  config.seed = 11;
  return config;
}

}  // namespace

static void BM_Round(benchmark::State& state) {
  ExperimentConfig config = round_config(static_cast<int>(state.range(0)),
                                         static_cast<int>(state.range(1)),
                                         Preset::aldsgd);
  apply_preset(config);
  const Problem problem =
      make_problem(config.problem, config.topology.m, 1);
  const DynamicGraphSet dset = build_dynamic_set(config.topology);
  const BudgetSchedule sched =
      BudgetSchedule::uniform(dset, config.hyper.budget);
  SystemState st =
      init_workers(config.topology.m, problem.param_dim(), config.init, 1);
  for (auto _ : state)
    st = round(st, config.hyper, dset, sched, problem, config.seed);
  benchmark::DoNotOptimize(st);
}
BENCHMARK(BM_Round)->Args({8, 20})->Args({8, 200})->Args({32, 50});

static void BM_RunExperiment(benchmark::State& state) {
  ExperimentConfig config = round_config(8, 20, Preset::aldsgd);
  config.rounds = state.range(0);
  config.stride = 50;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_experiment(config));
}
BENCHMARK(BM_RunExperiment)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_ConsensusDistance(benchmark::State& state) {
  InitMode mode;
  const SystemState st =
      init_workers(static_cast<int>(state.range(0)), 100, mode, 3);
  for (auto _ : state) benchmark::DoNotOptimize(consensus_distance(st));
}
BENCHMARK(BM_ConsensusDistance)->Arg(8)->Arg(64);

BENCHMARK_MAIN();
