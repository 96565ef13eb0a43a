#include <benchmark/benchmark.h>

#include "zrp/equilibria.hpp"
#include "zrp/hydro.hpp"
#include "zrp/kinetics.hpp"
#include "zrp/numerics.hpp"

using namespace zrp;

static void PartitionSeries(benchmark::State& state) {
  auto g = RateFunction::linear();
  const double phi = 0.01 * state.range(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(partition_function(g, phi, 1e-12));
  }
}
BENCHMARK(PartitionSeries)->Arg(50)->Arg(200)->Arg(800);

static void FugacityInversion(benchmark::State& state) {
  FugacityMaps maps(RateFunction::sqrt(),
                    EnvironmentLaw::iid_uniform(1.0, 2.0));
  RandomSource rng(5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(maps.fugacity(0.1 + 3.0 * rng.u01()));
  }
}
BENCHMARK(FugacityInversion);

static void SiteSampling(benchmark::State& state) {
  auto g = RateFunction::linear();
  RandomSource rng(5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_site(g, 1.3, 1e-12, rng));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(SiteSampling);

static void HydroStep(benchmark::State& state) {
  const int J = static_cast<int>(state.range(0));
  FugacityMaps maps(RateFunction::sqrt(),
                    EnvironmentLaw::iid_uniform(1.0, 2.0));
  auto spline = maps.fugacity_spline(4.0);
  HydroProblem prob;
  prob.phi = [spline](double u) { return spline(u); };
  prob.sigma = 1.0;
  prob.initial = [](double x) {
    return 1.0 + 0.5 * std::sin(2.0 * num::kPi * x / 4.0);
  };
  prob.width = 4.0;
  prob.horizon = 1.0;
  for (auto _ : state) {
    auto times = snapshot_grid(0.002, 2);
    benchmark::DoNotOptimize(solve(prob, J, 0.4, times));
  }
}
BENCHMARK(HydroStep)->Arg(64)->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
