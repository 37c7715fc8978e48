#pragma once

// Audio ingestion and music-beat detection on the token timeline.

#include "beatforge/tensor.hpp"
#include "beatforge/timeline.hpp"

#include <filesystem>
#include <vector>

namespace beatforge::signal {

struct Waveform {
    std::vector<double> samples;  // mono, nominally in [-1, 1]
    double sample_rate = 32000.0;

    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Reads RIFF/WAVE with PCM 8/16/24/32-bit or IEEE float 32/64-bit samples.
// Multi-channel audio is averaged to mono.
Waveform read_wav(const std::filesystem::path& path);
Waveform decode_wav(const std::string& bytes, const std::string& source);
enum class WavEncoding { pcm16, float32 };
void write_wav(const std::filesystem::path& path, const Waveform& w, WavEncoding enc = WavEncoding::pcm16);
std::string encode_wav(const Waveform& w, WavEncoding enc);

struct OnsetConfig {
    std::size_t window = 1024;
    // 0 selects sample_rate / 50 so STFT frames land on the token timeline.
    std::size_t hop = 0;
    std::size_t peak_window = 3;
    double threshold_k = 1.5;
};

std::size_t token_hop(double sample_rate);

// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

// frames x (window/2 + 1) magnitudes of the Hann-windowed STFT.
// frames = 1 + (len - window) / hop. Audio shorter than one window is an error.
Tensor stft_magnitude(const Waveform& w, std::size_t window, std::size_t hop);

// Half-wave-rectified frame-to-frame magnitude increase, summed over bins.
// Frame 0 is compared against silence.
std::vector<double> spectral_flux(const Tensor& spec);

// Beat at frame f iff flux[f] is the strict maximum of the clamped window
// [f - peak_window, f + peak_window] and exceeds that window's
// mean + threshold_k * (population) standard deviation.
std::vector<std::uint8_t> pick_peaks(const std::vector<double>& flux, std::size_t peak_window, double threshold_k);

// One beat flag per STFT frame.
BeatTrack detect_onsets(const Tensor& spec, std::size_t peak_window, double threshold_k);

// Full pipeline: STFT, flux, peak picking, then padded or truncated to
// t_a = floor(duration * 50).
BeatTrack detect_beats(const Waveform& w, const OnsetConfig& cfg = {});

// Log energies in `bands` mel-spaced bands of a magnitude spectrogram:
// frames x bands, each log(1 + band sum).
Tensor mel_log_features(const Tensor& spec, double sample_rate, std::size_t bands);

}  // namespace beatforge::signal
