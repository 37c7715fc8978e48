#pragma once

// Video frames, motion envelopes and video-beat extraction.

#include "beatforge/timeline.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace beatforge::motion {

// T x H x W x C bytes, row-major, C in {1, 3}.
struct FrameSeq {
    std::size_t t = 0, h = 0, w = 0, c = 0;
    double fps = 0.0;
    std::vector<std::uint8_t> frames;

    std::size_t frame_bytes() const noexcept { return h * w * c; }
    const std::uint8_t* frame(std::size_t i) const { return frames.data() + i * frame_bytes(); }
    std::uint8_t* frame(std::size_t i) { return frames.data() + i * frame_bytes(); }
    // Throws ContractError if the fields are inconsistent.
    void validate() const;
};

FrameSeq make_frames(std::size_t t, std::size_t h, std::size_t w, std::size_t c, double fps);

// "FSEQ", u32 version, u32 T H W C, f64 fps, then T*H*W*C bytes.
std::string encode_fseq(const FrameSeq& v);
FrameSeq decode_fseq(const std::string& bytes, const std::string& source);
void save_fseq(const std::filesystem::path& path, const FrameSeq& v);
FrameSeq load_fseq(const std::filesystem::path& path);

// Binary PPM (P6) or PGM (P5) with maxval <= 255.
void write_ppm(const std::filesystem::path& path, const FrameSeq& v, std::size_t index);
// Every *.ppm / *.pgm in dir whose stem is a decimal number, in numeric order.
FrameSeq read_image_dir(const std::filesystem::path& dir, double fps);

// T x (H*W) luma in 0..255 (ITU-R 601 weights for colour input).
std::vector<double> grayscale(const FrameSeq& v);

enum class Estimator { frame_difference, dense_flow };

struct MotionConfig {
    Estimator estimator = Estimator::frame_difference;
    std::size_t delta = 3;
    // Horn-Schunck smoothness weight (intensity units) and iteration cap.
    double flow_alpha = 10.0;
    std::size_t flow_iterations = 50;
    // Divide the envelope by its maximum before peak picking.
    bool normalize = false;
};

Estimator parse_estimator(const std::string& name);
std::string estimator_name(Estimator e);

// T-1 values; entry t is the spatial mean motion between frames t and t+1.
// frame_difference: mean |luma difference| / 255. dense_flow: mean flow
// magnitude in pixels.
std::vector<double> motion_magnitude(const FrameSeq& v, const MotionConfig& cfg = {});

// Mean per-pixel Horn-Schunck flow magnitude between two luma images.
double dense_flow_magnitude(const double* a, const double* b, std::size_t h, std::size_t w, double alpha,
                            std::size_t iterations);

// Linear interpolation of raw onto t_a evenly spaced points spanning it end to end.
FlowEnvelope to_token_timeline(const std::vector<double>& raw, std::size_t t_a);

// Beat where O[t] is the strict maximum of the clamped window [t - delta, t + delta].
VideoBeats extract_video_beats(const FlowEnvelope& o, std::size_t delta);

struct VideoAnalysis {
    std::vector<double> raw;
    FlowEnvelope envelope;
    VideoBeats beats;
};

VideoAnalysis analyze_video(const FrameSeq& v, std::size_t t_a, const MotionConfig& cfg = {});

// Token count covering the clip: floor(T / fps * 50).
std::size_t video_timeline_length(const FrameSeq& v);

}  // namespace beatforge::motion
