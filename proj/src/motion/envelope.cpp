#include "beatforge/error.hpp"
#include "beatforge/kernels.hpp"
#include "beatforge/motion.hpp"

#include <algorithm>
#include <cmath>

namespace beatforge::motion {

Estimator parse_estimator(const std::string& name) {
    if (name == "frame-difference" || name == "framediff") {
        return Estimator::frame_difference;
    }
    if (name == "dense-flow" || name == "flow") {
        return Estimator::dense_flow;
    }
    throw ConfigError("unknown motion estimator '" + name + "' (expected frame-difference or dense-flow)");
}

std::string estimator_name(Estimator e) {
    return e == Estimator::frame_difference ? "frame-difference" : "dense-flow";
}

double dense_flow_magnitude(const double* a, const double* b, std::size_t h, std::size_t w, double alpha,
                            std::size_t iterations) {
    const std::size_t n = h * w;
    auto at = [&](const double* img, std::size_t y, std::size_t x) {
        return img[std::min(y, h - 1) * w + std::min(x, w - 1)];
    };
    // Derivatives averaged over the 2x2x2 cube at each pixel; the far border is clamped.
    std::vector<double> ex(n), ey(n), et(n);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t i = y * w + x;
            ex[i] = 0.25 * (at(a, y, x + 1) - at(a, y, x) + at(a, y + 1, x + 1) - at(a, y + 1, x) +
                            at(b, y, x + 1) - at(b, y, x) + at(b, y + 1, x + 1) - at(b, y + 1, x));
            ey[i] = 0.25 * (at(a, y + 1, x) - at(a, y, x) + at(a, y + 1, x + 1) - at(a, y, x + 1) +
                            at(b, y + 1, x) - at(b, y, x) + at(b, y + 1, x + 1) - at(b, y, x + 1));
            et[i] = 0.25 * (at(b, y, x) - at(a, y, x) + at(b, y + 1, x) - at(a, y + 1, x) +
                            at(b, y, x + 1) - at(a, y, x + 1) + at(b, y + 1, x + 1) - at(a, y + 1, x + 1));
        }
    }
    std::vector<double> u(n, 0.0), v(n, 0.0), nu(n), nv(n);
    const double a2 = alpha * alpha;
    for (std::size_t it = 0; it < iterations; ++it) {
#pragma omp parallel for schedule(static) if (n >= 4096)
        for (std::size_t y = 0; y < h; ++y) {
            const std::size_t up = y == 0 ? 0 : y - 1, down = std::min(h - 1, y + 1);
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t left = x == 0 ? 0 : x - 1, right = std::min(w - 1, x + 1);
                const std::size_t i = y * w + x;
                // Weighted neighbourhood mean: edges 1/6, corners 1/12.
                auto avg = [&](const std::vector<double>& f) {
                    return (f[up * w + x] + f[down * w + x] + f[y * w + left] + f[y * w + right]) / 6.0 +
                           (f[up * w + left] + f[up * w + right] + f[down * w + left] + f[down * w + right]) / 12.0;
                };
                const double ub = avg(u), vb = avg(v);
                const double k = (ex[i] * ub + ey[i] * vb + et[i]) / (a2 + ex[i] * ex[i] + ey[i] * ey[i]);
                nu[i] = ub - ex[i] * k;
                nv[i] = vb - ey[i] * k;
            }
        }
        u.swap(nu);
        v.swap(nv);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += std::sqrt(u[i] * u[i] + v[i] * v[i]);
    }
    return total / static_cast<double>(n);
}

std::vector<double> motion_magnitude(const FrameSeq& v, const MotionConfig& cfg) {
    v.validate();
    if (v.t < 2) {
        throw ContractError("insufficient frames: motion needs at least 2, got " + std::to_string(v.t));
    }
    const std::size_t pixels = v.h * v.w;
    const std::vector<double> gray = grayscale(v);
    if (cfg.estimator == Estimator::frame_difference) {
        std::vector<double> raw = kernels::frame_abs_diff(gray, v.t, pixels);
        for (double& x : raw) {
            x /= 255.0;
        }
        return raw;
    }
    if (cfg.flow_iterations == 0 || cfg.flow_iterations > 50 || !(cfg.flow_alpha > 0.0)) {
        throw ConfigError("dense flow needs 1..50 iterations and alpha > 0");
    }
    std::vector<double> raw(v.t - 1);
    for (std::size_t t = 0; t + 1 < v.t; ++t) {
        raw[t] = dense_flow_magnitude(gray.data() + t * pixels, gray.data() + (t + 1) * pixels, v.h, v.w,
                                      cfg.flow_alpha, cfg.flow_iterations);
    }
    return raw;
}

FlowEnvelope to_token_timeline(const std::vector<double>& raw, std::size_t t_a) {
    if (raw.empty()) {
        throw ContractError("cannot resample an empty motion envelope");
    }
    if (t_a < 1) {
        throw ContractError("token timeline length must be >= 1");
    }
    FlowEnvelope out;
    out.values.resize(t_a);
    const std::size_t n = raw.size();
    if (n == 1 || t_a == 1) {
        std::fill(out.values.begin(), out.values.end(), raw.front());
        return out;
    }
    for (std::size_t i = 0; i < t_a; ++i) {
        // Exact rational position i*(n-1)/(t_a-1) split into integer and fractional parts.
        const std::size_t num = i * (n - 1);
        const std::size_t j = num / (t_a - 1);
        const double frac = static_cast<double>(num % (t_a - 1)) / static_cast<double>(t_a - 1);
        out.values[i] = frac == 0.0 ? raw[j] : raw[j] + frac * (raw[j + 1] - raw[j]);
    }
    return out;
}

VideoBeats extract_video_beats(const FlowEnvelope& o, std::size_t delta) {
    if (delta < 1) {
        throw ConfigError("video beat window delta must be >= 1");
    }
    const std::size_t n = o.values.size();
    VideoBeats out;
    out.rate = o.rate;
    out.beats.assign(n, 0);
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t lo = t >= delta ? t - delta : 0;
        const std::size_t hi = std::min(n - 1, t + delta);
        bool strict = true;
        for (std::size_t s = lo; s <= hi && strict; ++s) {
            strict = s == t || o.values[s] < o.values[t];
        }
        out.beats[t] = strict ? 1 : 0;
    }
    return out;
}

std::size_t video_timeline_length(const FrameSeq& v) {
    v.validate();
    return timeline_length(v.t, v.fps);
}

VideoAnalysis analyze_video(const FrameSeq& v, std::size_t t_a, const MotionConfig& cfg) {
    VideoAnalysis out;
    out.raw = motion_magnitude(v, cfg);
    out.envelope = to_token_timeline(out.raw, t_a);
    if (cfg.normalize) {
        const double peak = *std::max_element(out.envelope.values.begin(), out.envelope.values.end());
        if (peak > 0.0) {
            for (double& x : out.envelope.values) {
                x /= peak;
            }
        }
    }
    out.beats = extract_video_beats(out.envelope, cfg.delta);
    return out;
}

}  // namespace beatforge::motion
