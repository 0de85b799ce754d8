#include <benchmark/benchmark.h>

#include "aldsgd/topology.hpp"

using namespace aldsgd;

static void BM_MatchingDecompositionRing(benchmark::State& state) {
  const Graph g = make_pendant_ring(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(matching_decomposition(g));
}
BENCHMARK(BM_MatchingDecompositionRing)->Arg(8)->Arg(32)->Arg(64);

// Complete graphs force the fan-rotation fallback.
static void BM_MatchingDecompositionComplete(benchmark::State& state) {
  const Graph g = make_complete(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(matching_decomposition(g));
}
BENCHMARK(BM_MatchingDecompositionComplete)->Arg(8)->Arg(16)->Arg(32);

static void BM_ReduceDegree(benchmark::State& state) {
  const Graph g = make_complete(static_cast<int>(state.range(0)));
  const int target = g.node_count() - 1;
  for (auto _ : state) benchmark::DoNotOptimize(reduce_degree(g, target));
}
BENCHMARK(BM_ReduceDegree)->Arg(8)->Arg(12);

static void BM_DynamicSet(benchmark::State& state) {
  const Graph g = make_pendant_ring(static_cast<int>(state.range(0)));
  const auto shifts = default_shifts(g.node_count(), 3);
  for (auto _ : state)
    benchmark::DoNotOptimize(make_dynamic_set(g, 3, shifts));
}
BENCHMARK(BM_DynamicSet)->Arg(8)->Arg(32);
