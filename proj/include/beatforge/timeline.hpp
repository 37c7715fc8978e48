#pragma once

// Per-frame vectors on the 50 Hz token timeline and their CSV form.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace beatforge {

inline constexpr double kTokenRate = 50.0;

// Music beats: 1 where an onset was detected.
struct BeatTrack {
    std::vector<std::uint8_t> beats;
    double rate = kTokenRate;

    std::size_t size() const noexcept { return beats.size(); }
    std::size_t count() const;
};

// Video beats: 1 where the motion envelope is a strict local maximum.
struct VideoBeats {
    std::vector<std::uint8_t> beats;
    double rate = kTokenRate;

    std::size_t size() const noexcept { return beats.size(); }
    std::size_t count() const;
};

// Spatially averaged motion magnitude, resampled to the token timeline.
struct FlowEnvelope {
    std::vector<double> values;
    double rate = kTokenRate;

    std::size_t size() const noexcept { return values.size(); }
};

// t_a = floor(duration_seconds * rate), computed without rounding surprises
// for integral sample counts: floor(samples * rate / sample_rate).
std::size_t timeline_length(std::size_t samples, double sample_rate, double rate = kTokenRate);

namespace csv {

// Header "frame,beat"; one row per frame with value 0 or 1.
std::string format_binary(const std::vector<std::uint8_t>& values);
std::vector<std::uint8_t> parse_binary(const std::string& text, const std::string& source);
// Header "frame,<column>"; values printed with 17 significant digits.
std::string format_real(const std::vector<double>& values, const std::string& column);
std::vector<double> parse_real(const std::string& text, const std::string& column, const std::string& source);

void write_beats(const std::filesystem::path& path, const std::vector<std::uint8_t>& values);
std::vector<std::uint8_t> read_beats(const std::filesystem::path& path);

}  // namespace csv

}  // namespace beatforge
