// Serial reference kernels against their OpenMP counterparts.
// Run with OMP_NUM_THREADS set to compare thread counts.

#include "beatforge/kernels.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

namespace kern = beatforge::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

template <bool Parallel>
void BM_gemm_nn(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        if constexpr (Parallel) {
            kern::gemm_nn(a, b, c, n, n, n, false);
        } else {
            kern::reference::gemm_nn(a, b, c, n, n, n, false);
        }
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

template <bool Parallel>
void BM_stft(benchmark::State& state) {
    const auto window = static_cast<std::size_t>(state.range(0));
    const auto samples = random_vec(32000 * 2, 3);
    std::vector<double> hann(window);
    for (std::size_t i = 0; i < window; ++i) hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / window);
    std::size_t frames = 0;
    for (auto _ : state) {
        auto out = Parallel ? kern::stft_magnitude(samples, hann, 640, frames)
                            : kern::reference::stft_magnitude(samples, hann, 640, frames);
        benchmark::DoNotOptimize(out.data());
    }
    state.counters["frames"] = static_cast<double>(frames);
}

template <bool Parallel>
void BM_nearest_centroid(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0)), v = 256, d = 32;
    const auto points = random_vec(n * d, 4), cents = random_vec(v * d, 5);
    std::vector<std::uint32_t> idx(n);
    std::vector<double> dist(n);
    for (auto _ : state) {
        if constexpr (Parallel) {
            kern::nearest_centroid(points, cents, n, v, d, idx, dist);
        } else {
            kern::reference::nearest_centroid(points, cents, n, v, d, idx, dist);
        }
        benchmark::DoNotOptimize(idx.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_frame_abs_diff(benchmark::State& state) {
    const std::size_t t = static_cast<std::size_t>(state.range(0)), pixels = 224 * 224;
    const auto frames = random_vec(t * pixels, 6);
    for (auto _ : state) {
        auto out = Parallel ? kern::frame_abs_diff(frames, t, pixels) : kern::reference::frame_abs_diff(frames, t, pixels);
        benchmark::DoNotOptimize(out.data());
    }
}

}  // namespace

BENCHMARK(BM_gemm_nn<false>)->Name("gemm_nn/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm_nn<true>)->Name("gemm_nn/omp")->Arg(64)->Arg(256)->UseRealTime();
BENCHMARK(BM_stft<false>)->Name("stft/serial_dft")->Arg(256)->Arg(1024);
BENCHMARK(BM_stft<true>)->Name("stft/omp_fft")->Arg(256)->Arg(1024)->UseRealTime();
BENCHMARK(BM_nearest_centroid<false>)->Name("nearest_centroid/serial")->Arg(4096);
BENCHMARK(BM_nearest_centroid<true>)->Name("nearest_centroid/omp")->Arg(4096)->UseRealTime();
BENCHMARK(BM_frame_abs_diff<false>)->Name("frame_abs_diff/serial")->Arg(96);
BENCHMARK(BM_frame_abs_diff<true>)->Name("frame_abs_diff/omp")->Arg(96)->UseRealTime();

BENCHMARK_MAIN();
