#include "beatforge/kernels.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace beatforge::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

using Index = std::ptrdiff_t;

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};

}  // namespace

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    const bool parallel = m * n * k >= kParallelWork && m > 1;
#pragma omp parallel if (parallel)
    {
        std::vector<double> acc(n);
#pragma omp for schedule(static)
        for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = a[i * k + p];
                const double* brow = b.data() + p * n;
                for (std::size_t j = 0; j < n; ++j) {
                    acc[j] += aip * brow[j];
                }
            }
            double* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] = accumulate ? crow[j] + acc[j] : acc[j];
            }
        }
    }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    const bool parallel = m * n * k >= kParallelWork && m > 1;
#pragma omp parallel for schedule(static) if (parallel)
    for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double* arow = a.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b.data() + j * k;
            double sum = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                sum += arow[p] * brow[p];
            }
            c[i * n + j] = accumulate ? c[i * n + j] + sum : sum;
        }
    }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    const bool parallel = m * n * k >= kParallelWork && m > 1;
#pragma omp parallel if (parallel)
    {
        std::vector<double> acc(n);
#pragma omp for schedule(static)
        for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t p = 0; p < k; ++p) {
                const double api = a[p * m + i];
                const double* brow = b.data() + p * n;
                for (std::size_t j = 0; j < n; ++j) {
                    acc[j] += api * brow[j];
                }
            }
            double* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] = accumulate ? crow[j] + acc[j] : acc[j];
            }
        }
    }
}

std::vector<double> stft_magnitude(std::span<const double> samples, std::span<const double> window,
                                   std::size_t hop, std::size_t& frames_out) {
    const std::size_t w = window.size();
    const std::size_t bins = w / 2 + 1;
    frames_out = samples.size() < w ? 0 : 1 + (samples.size() - w) / hop;
    std::vector<double> out(frames_out * bins);
    if (frames_out == 0) {
        return out;
    }

    fftw_plan plan = nullptr;
    {
        std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * w)));
        std::unique_ptr<fftw_complex, FftwFree> spec(
            static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
        std::lock_guard lock(fftw_plan_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(w), in.get(), spec.get(), FFTW_ESTIMATE);
    }

#pragma omp parallel
    {
        std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * w)));
        std::unique_ptr<fftw_complex, FftwFree> spec(
            static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
#pragma omp for schedule(static)
        for (Index ff = 0; ff < static_cast<Index>(frames_out); ++ff) {
            const auto f = static_cast<std::size_t>(ff);
            for (std::size_t i = 0; i < w; ++i) {
                in.get()[i] = samples[f * hop + i] * window[i];
            }
            fftw_execute_dft_r2c(plan, in.get(), spec.get());
            for (std::size_t b = 0; b < bins; ++b) {
                out[f * bins + b] = std::hypot(spec.get()[b][0], spec.get()[b][1]);
            }
        }
    }

    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
    return out;
}

void nearest_centroid(std::span<const double> points, std::span<const double> centroids,
                      std::size_t n, std::size_t v, std::size_t d, std::span<std::uint32_t> index_out,
                      std::span<double> dist2_out) {
    const bool parallel = n * v * d >= kParallelWork && n > 1;
#pragma omp parallel for schedule(static) if (parallel)
    for (Index ii = 0; ii < static_cast<Index>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double* p = points.data() + i * d;
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t best_idx = 0;
        for (std::size_t c = 0; c < v; ++c) {
            const double* q = centroids.data() + c * d;
            double dist = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = p[j] - q[j];
                dist += diff * diff;
            }
            if (dist < best) {
                best = dist;
                best_idx = static_cast<std::uint32_t>(c);
            }
        }
        index_out[i] = best_idx;
        dist2_out[i] = best;
    }
}

std::vector<double> frame_abs_diff(std::span<const double> frames, std::size_t count, std::size_t pixels) {
    std::vector<double> out(count > 0 ? count - 1 : 0);
    const Index pairs = static_cast<Index>(out.size());
    const bool parallel = out.size() * pixels >= kParallelWork && pairs > 1;
#pragma omp parallel for schedule(static) if (parallel)
    for (Index tt = 0; tt < pairs; ++tt) {
        const auto t = static_cast<std::size_t>(tt);
        const double* f0 = frames.data() + t * pixels;
        const double* f1 = f0 + pixels;
        double sum = 0.0;
        for (std::size_t p = 0; p < pixels; ++p) {
            sum += std::abs(f1[p] - f0[p]);
        }
        out[t] = sum / static_cast<double>(pixels);
    }
    return out;
}

}  // namespace beatforge::kernels
