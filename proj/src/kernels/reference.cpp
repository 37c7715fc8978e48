#include "beatforge/kernels.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace beatforge::kernels::reference {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double sum = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                sum += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] = accumulate ? c[i * n + j] + sum : sum;
        }
    }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double sum = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                sum += a[i * k + p] * b[j * k + p];
            }
            c[i * n + j] = accumulate ? c[i * n + j] + sum : sum;
        }
    }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double sum = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                sum += a[p * m + i] * b[p * n + j];
            }
            c[i * n + j] = accumulate ? c[i * n + j] + sum : sum;
        }
    }
}

std::vector<double> stft_magnitude(std::span<const double> samples, std::span<const double> window,
                                   std::size_t hop, std::size_t& frames_out) {
    const std::size_t w = window.size();
    const std::size_t bins = w / 2 + 1;
    frames_out = samples.size() < w ? 0 : 1 + (samples.size() - w) / hop;
    std::vector<double> out(frames_out * bins);
    std::vector<double> cos_table(w), sin_table(w);
    for (std::size_t i = 0; i < w; ++i) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(w);
        cos_table[i] = std::cos(phase);
        sin_table[i] = std::sin(phase);
    }
    std::vector<double> frame(w);
    for (std::size_t f = 0; f < frames_out; ++f) {
        for (std::size_t i = 0; i < w; ++i) {
            frame[i] = samples[f * hop + i] * window[i];
        }
        for (std::size_t b = 0; b < bins; ++b) {
            double re = 0.0;
            double im = 0.0;
            for (std::size_t i = 0; i < w; ++i) {
                const std::size_t idx = (b * i) % w;
                re += frame[i] * cos_table[idx];
                im -= frame[i] * sin_table[idx];
            }
            out[f * bins + b] = std::hypot(re, im);
        }
    }
    return out;
}

void nearest_centroid(std::span<const double> points, std::span<const double> centroids,
                      std::size_t n, std::size_t v, std::size_t d, std::span<std::uint32_t> index_out,
                      std::span<double> dist2_out) {
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t best_idx = 0;
        for (std::size_t c = 0; c < v; ++c) {
            double dist = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = points[i * d + j] - centroids[c * d + j];
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
    for (std::size_t t = 0; t + 1 < count; ++t) {
        double sum = 0.0;
        for (std::size_t p = 0; p < pixels; ++p) {
            sum += std::abs(frames[(t + 1) * pixels + p] - frames[t * pixels + p]);
        }
        out[t] = sum / static_cast<double>(pixels);
    }
    return out;
}

}  // namespace beatforge::kernels::reference
