#include <benchmark/benchmark.h>

#include "zrp/kinetics.hpp"

using namespace zrp;

namespace {

SimulationState equilibrium_state(int L, int N) {
  FugacityMaps maps(RateFunction::linear(),
                    EnvironmentLaw::iid_uniform(1.0, 2.0));
  RandomSource rng(1);
  Environment env = generate(maps.law(), L, 2);
  return init_equilibrium(env, maps.g(), maps, 1.0, N,
                          TransitionKernel::nearest_neighbor(), rng);
}

}  // namespace

static void EventLoop(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  auto st = equilibrium_state(L, 32);
  RandomSource rng(7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(step(st, rng));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(EventLoop)->RangeMultiplier(4)->Range(64, 16384);

static void WeightTreeUpdate(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  std::vector<double> w(L, 1.0);
  WeightTree tree(w);
  RandomSource rng(3);
  int i = 0;
  for (auto _ : state) {
    tree.set(int(rng.bits() % L), 0.5 + rng.u01());
    if ((++i & 1023) == 0) benchmark::DoNotOptimize(tree.total());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(WeightTreeUpdate)->RangeMultiplier(4)->Range(64, 16384);

static void WeightTreeSample(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  std::vector<double> w(L);
  RandomSource rng(3);
  for (auto& v : w) v = rng.u01();
  WeightTree tree(w);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tree.sample(rng.u01() * tree.total()));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(WeightTreeSample)->RangeMultiplier(4)->Range(64, 16384);

static void TiltedEventLoop(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  const int N = L / 4;
  auto st = equilibrium_state(L, N);
  const double horizon = 0.2 / N;
  TestFunction H = TestFunction::bump(0.5, 2.0, 1.0, {1.0}, horizon);
  RandomSource rng(7);
  auto snaps = snapshot_grid(horizon, 2);
  RunOptions opt;
  opt.grid_cells = 16;
  for (auto _ : state) {
    state.PauseTiming();
    auto fresh = equilibrium_state(L, N);
    state.ResumeTiming();
    benchmark::DoNotOptimize(run_tilted(fresh, H, horizon, snaps, rng, opt));
  }
}
BENCHMARK(TiltedEventLoop)->Arg(128)->Arg(512);

BENCHMARK_MAIN();
