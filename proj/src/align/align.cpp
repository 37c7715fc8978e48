#include "beatforge/align.hpp"

#include "beatforge/error.hpp"

#include <algorithm>
#include <cmath>

namespace beatforge::align {

namespace {

void check_lengths(std::size_t video, std::size_t music, double video_rate, double music_rate) {
    if (video != music) {
        throw ContractError("beat tracks differ in length (" + std::to_string(video) + " video vs " +
                            std::to_string(music) + " music frames)");
    }
    if (video_rate != music_rate) {
        throw ContractError("beat tracks differ in frame rate");
    }
}

// prefix[i] = number of beats in [0, i).
std::vector<std::size_t> prefix_counts(const std::vector<std::uint8_t>& beats) {
    std::vector<std::size_t> prefix(beats.size() + 1, 0);
    for (std::size_t i = 0; i < beats.size(); ++i) {
        prefix[i + 1] = prefix[i] + (beats[i] ? 1 : 0);
    }
    return prefix;
}

std::size_t window_count(const std::vector<std::size_t>& prefix, std::size_t i, std::size_t delta) {
    const std::size_t n = prefix.size() - 1;
    const std::size_t lo = i >= delta ? i - delta : 0;
    const std::size_t hi = std::min(n, i + delta + 1);
    return prefix[hi] - prefix[lo];
}

}  // namespace

void AlignConfig::validate() const {
    if (delta < 1) {
        throw ConfigError("alignment delta must be >= 1");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ConfigError("alignment alpha must lie in (0, 1]");
    }
}

std::vector<std::uint8_t> overlap_mask(const VideoBeats& pv, const BeatTrack& pa, std::size_t delta) {
    check_lengths(pv.size(), pa.size(), pv.rate, pa.rate);
    const auto prefix = prefix_counts(pa.beats);
    std::vector<std::uint8_t> mask(pv.size(), 0);
    for (std::size_t i = 0; i < pv.size(); ++i) {
        mask[i] = pv.beats[i] && window_count(prefix, i, delta) > 0;
    }
    return mask;
}

AlignmentWeights overlap_weights(const VideoBeats& pv, const BeatTrack& pa, const AlignConfig& cfg) {
    cfg.validate();
    const auto mask = overlap_mask(pv, pa, cfg.delta);
    AlignmentWeights out;
    out.weights.resize(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        out.weights[i] = mask[i] ? 1.0 : cfg.alpha;
    }
    return out;
}

namespace {

AlignScore finish(AlignScore s) {
    s.no_video_beats = s.video_beats == 0;
    s.no_music_beats = s.music_beats == 0;
    s.recall = s.no_video_beats ? 0.0 : static_cast<double>(s.matched_video) / static_cast<double>(s.video_beats);
    s.precision = s.no_music_beats ? 0.0 : static_cast<double>(s.matched_music) / static_cast<double>(s.music_beats);
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

}  // namespace

AlignScore mv_align_score(const BeatTrack& generated, const VideoBeats& pv, std::size_t delta) {
    check_lengths(pv.size(), generated.size(), pv.rate, generated.rate);
    const auto music_prefix = prefix_counts(generated.beats);
    const auto video_prefix = prefix_counts(pv.beats);
    AlignScore s;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        if (pv.beats[i]) {
            ++s.video_beats;
            s.matched_video += window_count(music_prefix, i, delta) > 0;
        }
        if (generated.beats[i]) {
            ++s.music_beats;
            s.matched_music += window_count(video_prefix, i, delta) > 0;
        }
    }
    return finish(s);
}

AlignScore combine_scores(const std::vector<AlignScore>& scores) {
    AlignScore total;
    for (const auto& s : scores) {
        total.video_beats += s.video_beats;
        total.music_beats += s.music_beats;
        total.matched_video += s.matched_video;
        total.matched_music += s.matched_music;
    }
    return finish(total);
}

}  // namespace beatforge::align
