#include <benchmark/benchmark.h>

#include <cmath>

#include "qpi/forward.hpp"
#include "qpi/phase.hpp"
#include "qpi/recon.hpp"
#include "qpi/unwrap.hpp"

namespace {

qpi::ComplexSample bump(int n)
{
    auto s = qpi::ComplexSample::blank({n, n, 43.0});
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double r2 = (x - n / 2.0) * (x - n / 2.0) + (y - n / 2.0) * (y - n / 2.0);
            s.phase(x, y) = 10.0 * qpi::kPi * std::exp(-r2 / (2.0 * (n / 6.0) * (n / 6.0)));
        }
    return s;
}

void BM_Simulate(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    const auto sample = bump(n);
    qpi::SystemParams p;
    p.noise = state.range(1) ? qpi::NoiseModel::poisson : qpi::NoiseModel::none;
    std::uint64_t frame = 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(qpi::forward::simulate_frame(sample, p, 0.0, 0.5, 1, frame++));
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Simulate)->Args({256, 0})->Args({256, 1});

void BM_QuadraturePhase(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    const auto f = qpi::forward::simulate_frame(bump(n), qpi::SystemParams{}, 0.0, 0.5, 1);
    const auto& c = f.channels;
    for (auto _ : state)
        benchmark::DoNotOptimize(qpi::recon::quadrature_phase(c[0], c[1], c[2], c[3]));
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_QuadraturePhase)->Arg(256)->Arg(1024);

void BM_GaussianBlur(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    const auto s = bump(n);
    for (auto _ : state)
        benchmark::DoNotOptimize(qpi::recon::gaussian_blur(s.phase, 1.5));
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_GaussianBlur)->Arg(256)->Arg(1024);

void BM_Unwrap(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    auto wrapped = bump(n).phase;
    for (auto& v : wrapped.values())
        v = qpi::wrap_phase(v);
    const qpi::Mask valid(n, n, true);
    for (auto _ : state)
        benchmark::DoNotOptimize(qpi::recon::unwrap_2d(wrapped, valid));
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Unwrap)->Arg(256)->Arg(512);

} // namespace

BENCHMARK_MAIN();
