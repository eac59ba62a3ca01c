// Serial vs OpenMP stacked kernels, and a full run of each mode.

#include <benchmark/benchmark.h>

#include "zoc/engine.hpp"

using namespace zoc;

namespace {

struct Fixture {
  Problem problem;
  std::vector<Oracle> oracles;
  NormalTable table;
  Vector x;

  Fixture(std::size_t n, std::size_t m)
      : problem(make(n, m)), oracles(problem.make_oracles()), table(10000, m, 5),
        x(initial_point(problem, Box::cube(m, -1, 1), 3)) {}

  static Problem make(std::size_t n, std::size_t m) {
    const Topology topo = generate_graph(GraphKind::kRandomConnected, n, 0.3, 13, m);
    std::vector<ObjectivePtr> fs;
    for (const auto& d : synthesize_data(n, 100, m, 7)) fs.push_back(logreg_objective(d, 0.1, 1e-3, n));
    return Problem::make(topo, fs, NoiseModel::additive_gaussian(0.001));
  }
};

Fixture& fixture() {
  static Fixture f(15, 10);
  return f;
}

Execution exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::kSerial : Execution::kParallel;
}

void BM_StackedEstimate(benchmark::State& state) {
  Fixture& f = fixture();
  const SmoothingParams params{0.01, 30};
  std::size_t iter = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_stacked_gradient(f.oracles, f.x, params, 1, ++iter, exec_of(state)));
  }
}

void BM_StackedEvaluation(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(stacked_smoothed_evaluation(f.problem.objectives, f.x, 0.01, &f.table, exec_of(state)));
  }
}

void BM_Run(benchmark::State& state) {
  Fixture& f = fixture();
  AlgoParams params;
  params.rho = 1e3;
  params.mu = 0.01;
  params.batch = 30;
  params.total_iters = 50;
  RunOptions o;
  o.x0 = f.x;
  o.table = &f.table;
  o.exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(run_centralized(f.problem, params, o));
}

}  // namespace

// Argument 0: serial, 1: OpenMP.
BENCHMARK(BM_StackedEstimate)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_StackedEvaluation)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Run)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
