#pragma once

// Dataset curation: intra-video frame similarity, threshold filtering, a
// vocal-removal hook around an external command, and a resumable pipeline
// over a JSON Lines manifest.

#include "beatforge/motion.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace beatforge::curate {

enum class Status { pending, kept, filtered, failed };

std::string status_name(Status s);
Status parse_status(const std::string& name);

struct ManifestEntry {
    std::string id;
    std::string video;
    std::string audio;
    double duration_s = 0.0;
    std::optional<double> frame_similarity;
    bool vocals_removed = false;
    Status status = Status::pending;
    std::string error;  // set for failed entries

    bool operator==(const ManifestEntry&) const = default;
};

std::string entry_json(const ManifestEntry& e);
// `source` and `line` go into FormatError messages.
ManifestEntry parse_entry(const std::string& line, const std::string& source, std::size_t line_no);

std::vector<ManifestEntry> parse_manifest(const std::string& text, const std::string& source);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
std::string format_manifest(const std::vector<ManifestEntry>& entries);

// ---------------------------------------------------------------- similarity

// Per-frame feature vector; cosine similarity is taken between these.
using FrameFeature = std::function<std::vector<double>(const motion::FrameSeq&, std::size_t frame)>;

// 16 x 16 box-averaged grayscale with its mean removed.
std::vector<double> grayscale_feature(const motion::FrameSeq& v, std::size_t frame);

struct SimilarityConfig {
    std::size_t sample_pairs = 64;
    std::uint64_t seed = 0;
    FrameFeature feature;  // empty means grayscale_feature
};

// Mean cosine similarity over all frame pairs, or over `sample_pairs` random
// distinct pairs when there are more. Two flat frames count as identical (1),
// a flat frame against a textured one as 0. ContractError if T < 2.
double frame_similarity(const motion::FrameSeq& v, const SimilarityConfig& cfg = {});

// Pair-sampling seed derived from the entry id.
std::uint64_t seed_for_id(const std::string& id);

// ---------------------------------------------------------------- filtering

struct FilterReport {
    std::size_t kept = 0, filtered = 0, failed = 0, pending = 0;
    std::vector<std::string> warnings;
};

// kept if similarity < threshold, filtered otherwise. Failed entries stay
// failed; entries without a similarity stay pending with a warning.
FilterReport filter_manifest(std::vector<ManifestEntry>& entries, double threshold = 0.7);

// ---------------------------------------------------------------- vocals

// Runs `command_template` with every "{audio}" replaced by the shell-quoted
// audio path. Without a command the entry is left with vocals_removed = false.
// A missing audio file or nonzero exit marks the entry failed.
void mark_vocals(ManifestEntry& entry, const std::optional<std::string>& command_template);

// ---------------------------------------------------------------- pipeline

struct PipelineConfig {
    double threshold = 0.7;
    std::size_t sample_pairs = 64;
    std::optional<std::string> separator;
    double video_fps = 25.0;  // for image directories
};

struct PipelineResult {
    std::vector<ManifestEntry> entries;
    FilterReport report;
    std::size_t reused = 0;     // results taken from the journal
    std::size_t processed = 0;  // results computed in this run
};

// Processes every entry of `manifest` into out_dir/manifest.jsonl. Each
// computed result is appended to out_dir/journal.jsonl under a key hashing
// the entry, the video bytes and the settings, so a rerun after an
// interruption skips finished work. `on_record` runs after each journal
// append (tests use it to interrupt the run).
PipelineResult run_pipeline(const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
                            const PipelineConfig& cfg,
                            const std::function<void(std::size_t appended)>& on_record = {});

// Video paths ending in .fseq are FrameSeq files; anything else is read as a
// directory of numbered PPM/PGM frames.
motion::FrameSeq load_video(const std::filesystem::path& path, double fps);

}  // namespace beatforge::curate
