#include "beatforge/error.hpp"
#include "beatforge/kernels.hpp"
#include "beatforge/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace beatforge::signal {

std::size_t token_hop(double sample_rate) {
    const double hop = sample_rate / kTokenRate;
    if (hop < 1.0 || std::abs(hop - std::round(hop)) > 1e-9) {
        throw ConfigError("sample rate " + std::to_string(sample_rate) + " Hz is not a multiple of the 50 Hz token rate");
    }
    return static_cast<std::size_t>(std::lround(hop));
}

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
    return w;
}

Tensor stft_magnitude(const Waveform& w, std::size_t window, std::size_t hop) {
    if (window == 0 || hop == 0 || window < hop) {
        throw ConfigError("STFT needs window >= hop > 0 (window " + std::to_string(window) + ", hop " +
                          std::to_string(hop) + ")");
    }
    if (!(w.sample_rate > 0.0)) {
        throw ContractError("sample rate must be positive");
    }
    if (w.samples.size() < window) {
        throw ContractError("empty input: " + std::to_string(w.samples.size()) +
                            " samples is shorter than one analysis window of " + std::to_string(window));
    }
    const auto win = hann_window(window);
    std::size_t frames = 0;
    auto mags = kernels::stft_magnitude(w.samples, win, hop, frames);
    return Tensor({frames, window / 2 + 1}, std::move(mags));
}

std::vector<double> spectral_flux(const Tensor& spec) {
    const std::size_t frames = spec.rows();
    const std::size_t bins = spec.cols();
    std::vector<double> flux(frames, 0.0);
    for (std::size_t f = 0; f < frames; ++f) {
        double total = 0.0;
        for (std::size_t b = 0; b < bins; ++b) {
            const double prev = f == 0 ? 0.0 : spec(f - 1, b);
            total += std::max(0.0, spec(f, b) - prev);
        }
        flux[f] = total;
    }
    return flux;
}

std::vector<std::uint8_t> pick_peaks(const std::vector<double>& flux, std::size_t peak_window, double threshold_k) {
    const std::size_t n = flux.size();
    std::vector<std::uint8_t> beats(n, 0);
    for (std::size_t f = 0; f < n; ++f) {
        const std::size_t lo = f >= peak_window ? f - peak_window : 0;
        const std::size_t hi = std::min(n - 1, f + peak_window);
        bool strict_max = true;
        double mean = 0.0;
        for (std::size_t g = lo; g <= hi; ++g) {
            mean += flux[g];
            if (g != f && flux[g] >= flux[f]) {
                strict_max = false;
            }
        }
        if (!strict_max) {
            continue;
        }
        const double count = static_cast<double>(hi - lo + 1);
        mean /= count;
        double var = 0.0;
        for (std::size_t g = lo; g <= hi; ++g) {
            var += (flux[g] - mean) * (flux[g] - mean);
        }
        const double stddev = std::sqrt(var / count);
        if (flux[f] > mean + threshold_k * stddev) {
            beats[f] = 1;
        }
    }
    return beats;
}

BeatTrack detect_onsets(const Tensor& spec, std::size_t peak_window, double threshold_k) {
    return BeatTrack{pick_peaks(spectral_flux(spec), peak_window, threshold_k), kTokenRate};
}

BeatTrack detect_beats(const Waveform& w, const OnsetConfig& cfg) {
    const std::size_t hop = cfg.hop == 0 ? token_hop(w.sample_rate) : cfg.hop;
    BeatTrack track = detect_onsets(stft_magnitude(w, cfg.window, hop), cfg.peak_window, cfg.threshold_k);
    track.beats.resize(timeline_length(w.samples.size(), w.sample_rate), 0);
    return track;
}

Tensor mel_log_features(const Tensor& spec, double sample_rate, std::size_t bands) {
    const std::size_t frames = spec.rows();
    const std::size_t bins = spec.cols();
    if (bands == 0 || bands > bins) {
        throw ConfigError("band count must be in [1, " + std::to_string(bins) + "]");
    }
    auto hz_to_mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
    auto mel_to_hz = [](double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); };
    const double nyquist = sample_rate / 2.0;
    const double top = hz_to_mel(nyquist);
    // Band b covers bins [edge[b], edge[b+1]); every band gets at least one bin.
    std::vector<std::size_t> edge(bands + 1);
    for (std::size_t b = 0; b <= bands; ++b) {
        const double hz = mel_to_hz(top * static_cast<double>(b) / static_cast<double>(bands));
        edge[b] = static_cast<std::size_t>(std::lround(hz / nyquist * static_cast<double>(bins - 1)));
    }
    edge[bands] = bins;
    for (std::size_t b = 1; b <= bands; ++b) {
        edge[b] = std::max(edge[b], edge[b - 1] + 1);
    }
    for (std::size_t b = bands; b-- > 0;) {
        edge[b] = std::min(edge[b], edge[b + 1] - 1);
    }
    Tensor out = Tensor::matrix(frames, bands);
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t b = 0; b < bands; ++b) {
            double total = 0.0;
            for (std::size_t k = edge[b]; k < edge[b + 1]; ++k) {
                total += spec(f, k);
            }
            out(f, b) = std::log1p(total);
        }
    }
    return out;
}

}  // namespace beatforge::signal
