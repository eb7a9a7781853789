// Serial reference against OpenMP for each parallel kernel.
#include <benchmark/benchmark.h>

#include <cmath>

#include "vfg/grid_kernels.hpp"
#include "vfg/models.hpp"
#include "vfg/oracle.hpp"

using namespace vfg;

namespace {

const auto kConj = GaussianBelief::from_moments(1.0, 0.5);
const auto kLg = LogGammaMessage::make(0.5, 3.0);

void grid_objective(benchmark::State& state, bool parallel) {
    const auto xs = kernels::linspace(-5.0, 5.0, static_cast<int>(state.range(0)));
    const auto ys = kernels::linspace(-6.0, 3.0, static_cast<int>(state.range(0)));
    auto f = [](double m, double lv) { return oracle::gaussian_edge_objective(m, std::exp(lv), kConj, kLg); };
    for (auto _ : state) benchmark::DoNotOptimize(kernels::evaluate_grid(f, xs, ys, parallel));
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

void brute_force(benchmark::State& state, bool parallel) {
    for (auto _ : state)
        benchmark::DoNotOptimize(oracle::brute_force_edge_min(std::make_pair(kConj, kLg), oracle::GridSpec::gaussian_default(), parallel));
}

void depth2(benchmark::State& state, bool parallel) {
    const int n = static_cast<int>(state.range(0));
    Mat phi(n, 3);
    for (int k = 0; k < n; ++k) phi.row(k) = xor_phi((k % 7) / 6.0, (k % 5) / 4.0).transpose();
    const auto experts = xor_experts(500.0);
    for (auto _ : state) benchmark::DoNotOptimize(depth2_readout(experts, phi, {}, parallel));
    state.SetItemsProcessed(state.iterations() * n);
}

}  // namespace

BENCHMARK_CAPTURE(grid_objective, serial, false)->Arg(51)->Arg(101)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(grid_objective, parallel, true)->Arg(51)->Arg(101)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(brute_force, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(brute_force, parallel, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(depth2, serial, false)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(depth2, parallel, true)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
