// Serial against OpenMP-parallel timings of the three heavy kernels.
// The second benchmark argument selects the schedule: 0 serial, 1 parallel.

#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>

#include "uavassoc/analytic.hpp"
#include "uavassoc/harness.hpp"

using namespace uavassoc;

namespace {

std::vector<double> db_grid() {
  std::vector<double> y;
  for (double d = -20.0; d <= 40.0; d += 2.0) y.push_back(std::pow(10.0, d / 10.0));
  return y;
}

void BM_McSinrCdf(benchmark::State& state) {
  const FadingConfig cfg;
  const std::vector<double> ys = db_grid();
  for (auto _ : state) {
    benchmark::DoNotOptimize(mc_sinr_cdf(cfg, ys, state.range(0), 7, state.range(1) != 0));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EmpiricalLos(benchmark::State& state) {
  const EnvConfig env;
  const std::vector<double> r{100.0, 300.0, 600.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        estimate_empirical_los(env, 100.0, r, static_cast<int>(state.range(0)), 7, state.range(1) != 0));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 3);
}

std::shared_ptr<const IpnnModel> bench_model() {
  static const auto model = [] {
    ScenarioConfig cfg;
    cfg.ipnn_trials = 4000;
    cfg.ipnn.optimiser.epochs = 40;
    return train_ipnn_for(cfg, 3);
  }();
  return model;
}

void BM_FrozenEvaluation(benchmark::State& state) {
  const ScenarioConfig cfg;
  const std::vector<PolicyKind> kinds{PolicyKind::Closest, PolicyKind::MaxOmniSinr, PolicyKind::IpnnOnly};
  const auto model = bench_model();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        evaluate_frozen(cfg, kinds, model, nullptr, 5, 0, static_cast<int>(state.range(0)), state.range(1) != 0));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_McSinrCdf)->Args({50000, 0})->Args({50000, 1})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EmpiricalLos)->Args({2000, 0})->Args({2000, 1})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_FrozenEvaluation)->Args({16, 0})->Args({16, 1})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
