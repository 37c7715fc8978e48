#pragma once

// Video/music beat overlap weights and the beat-alignment metric.

#include "beatforge/timeline.hpp"

#include <vector>

namespace beatforge::align {

struct AlignConfig {
    // Half-width of the music-beat search window around each video beat.
    std::size_t delta = 3;
    double alpha = 0.05;

    void validate() const;
};

struct AlignmentWeights {
    std::vector<double> weights;

    std::size_t size() const noexcept { return weights.size(); }
};

// 1 where pv[i] = 1 and some music beat lies in [i - delta, i + delta]
// (frames outside the sequence count as beat-free), alpha elsewhere.
std::vector<std::uint8_t> overlap_mask(const VideoBeats& pv, const BeatTrack& pa, std::size_t delta);
AlignmentWeights overlap_weights(const VideoBeats& pv, const BeatTrack& pa, const AlignConfig& cfg);

struct AlignScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t video_beats = 0;
    std::size_t music_beats = 0;
    std::size_t matched_video = 0;
    std::size_t matched_music = 0;
    // Set when the corresponding denominator was zero (score reported as 0).
    bool no_video_beats = false;
    bool no_music_beats = false;
};

// A video beat is matched when any generated beat lies within +-delta frames,
// and a generated beat is matched when any video beat does.
AlignScore mv_align_score(const BeatTrack& generated, const VideoBeats& pv, std::size_t delta);

// Micro-averaged score over several clips (counts summed before dividing).
AlignScore combine_scores(const std::vector<AlignScore>& scores);

}  // namespace beatforge::align
