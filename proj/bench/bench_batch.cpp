// Serial reference vs OpenMP drivers for the three batch samplers.
// Arg 0 selects Exec::Serial, 1 selects Exec::Parallel.

#include <benchmark/benchmark.h>

#include "gpcond/batch.hpp"

using namespace gpcond;

namespace {

const ConditionedModel& zabb() {
  static const ConditionedModel m(Kernel::brownian(1.0),
                                  {Condition::point(1.0, 1.0), Condition::uniform(1.0, 0.0, 1.0)});
  return m;
}

const std::vector<double> lattice{0.1, 0.3, 0.5, 0.7, 0.9};

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::Parallel : Exec::Serial; }

void BM_anticipative(benchmark::State& st) {
  const auto grid = uniform_grid(1.0, 1001);
  GridTransform gt(zabb(), grid);
  for (double t : lattice) gt.add_point(static_cast<std::size_t>(std::llround(t * 1000)));
  const std::size_t n = 20000;
  for (auto _ : st) benchmark::DoNotOptimize(run_anticipative(gt, n, 1, exec_of(st)));
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * n));
}

void BM_series(benchmark::State& st) {
  const SeriesBasis sb(zabb(), 2048);
  const auto rows = sb.deflated(lattice);
  const std::size_t n = 20000;
  for (auto _ : st) benchmark::DoNotOptimize(run_series(sb, rows, n, 1, exec_of(st)));
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * n));
}

void BM_sde(benchmark::State& st) {
  const DriftEvaluator de(zabb());
  const std::size_t n = 2000;
  for (auto _ : st) benchmark::DoNotOptimize(run_sde_coupled(de, 1e-3, 1e-3, lattice, n, 1, exec_of(st)));
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * n));
}

}  // namespace

BENCHMARK(BM_anticipative)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_series)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_sde)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
