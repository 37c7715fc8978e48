#include "beatforge/curate.hpp"

#include "beatforge/binary_io.hpp"
#include "beatforge/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sys/wait.h>

namespace beatforge::curate {

namespace fs = std::filesystem;
using nlohmann::json;

std::string status_name(Status s) {
    switch (s) {
        case Status::pending: return "pending";
        case Status::kept: return "kept";
        case Status::filtered: return "filtered";
        case Status::failed: return "failed";
    }
    return "pending";
}

Status parse_status(const std::string& name) {
    if (name == "pending") return Status::pending;
    if (name == "kept") return Status::kept;
    if (name == "filtered") return Status::filtered;
    if (name == "failed") return Status::failed;
    throw ContractError("unknown status '" + name + "'");
}

std::string entry_json(const ManifestEntry& e) {
    json j = {{"id", e.id},
              {"video", e.video},
              {"audio", e.audio},
              {"duration_s", e.duration_s},
              {"frame_similarity", e.frame_similarity ? json(*e.frame_similarity) : json(nullptr)},
              {"vocals_removed", e.vocals_removed},
              {"status", status_name(e.status)}};
    if (!e.error.empty()) {
        j["error"] = e.error;
    }
    return j.dump();
}

ManifestEntry parse_entry(const std::string& line, const std::string& source, std::size_t line_no) {
    const std::string where = source + ":" + std::to_string(line_no);
    try {
        const json j = json::parse(line);
        ManifestEntry e;
        e.id = j.at("id").get<std::string>();
        if (e.id.empty()) {
            throw FormatError(where + ": empty id");
        }
        e.video = j.value("video", "");
        e.audio = j.value("audio", "");
        e.duration_s = j.value("duration_s", 0.0);
        if (j.contains("frame_similarity") && !j.at("frame_similarity").is_null()) {
            e.frame_similarity = j.at("frame_similarity").get<double>();
        }
        e.vocals_removed = j.value("vocals_removed", false);
        e.status = parse_status(j.value("status", "pending"));
        e.error = j.value("error", "");
        return e;
    } catch (const json::exception& ex) {
        throw FormatError(where + ": " + ex.what());
    } catch (const ContractError& ex) {
        throw FormatError(where + ": " + ex.what());
    }
}

std::vector<ManifestEntry> parse_manifest(const std::string& text, const std::string& source) {
    std::vector<ManifestEntry> out;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        ++line_no;
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        out.push_back(parse_entry(line, source, line_no));
    }
    return out;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    return parse_manifest(io::read_file(path), path.string());
}

std::string format_manifest(const std::vector<ManifestEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        out += entry_json(e);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------- similarity

std::vector<double> grayscale_feature(const motion::FrameSeq& v, std::size_t frame) {
    constexpr std::size_t n = 16;
    const std::uint8_t* px = v.frame(frame);
    std::vector<double> out(n * n);
    for (std::size_t by = 0; by < n; ++by) {
        const std::size_t y0 = by * v.h / n;
        const std::size_t y1 = std::max((by + 1) * v.h / n, y0 + 1);
        for (std::size_t bx = 0; bx < n; ++bx) {
            const std::size_t x0 = bx * v.w / n;
            const std::size_t x1 = std::max((bx + 1) * v.w / n, x0 + 1);
            double sum = 0.0;
            for (std::size_t y = y0; y < y1; ++y) {
                for (std::size_t x = x0; x < x1; ++x) {
                    const std::uint8_t* p = px + (y * v.w + x) * v.c;
                    sum += v.c >= 3 ? 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2] : p[0];
                }
            }
            out[by * n + bx] = sum / static_cast<double>((y1 - y0) * (x1 - x0));
        }
    }
    double mean = 0.0;
    for (double x : out) mean += x;
    mean /= static_cast<double>(out.size());
    for (double& x : out) x -= mean;
    return out;
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw DimensionError("frame features differ in length");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    // Flat frames (zero after centring) are treated as identical to each other.
    constexpr double tiny = 1e-18;
    if (na <= tiny && nb <= tiny) return 1.0;
    if (na <= tiny || nb <= tiny) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double frame_similarity(const motion::FrameSeq& v, const SimilarityConfig& cfg) {
    v.validate();
    if (v.t < 2) {
        throw ContractError("frame similarity needs at least 2 frames, got " + std::to_string(v.t));
    }
    if (cfg.sample_pairs == 0) {
        throw ConfigError("sample_pairs must be >= 1");
    }
    const FrameFeature feature = cfg.feature ? cfg.feature : FrameFeature(grayscale_feature);
    std::vector<std::vector<double>> feats(v.t);
    std::vector<bool> have(v.t, false);
    auto get = [&](std::size_t i) -> const std::vector<double>& {
        if (!have[i]) {
            feats[i] = feature(v, i);
            have[i] = true;
        }
        return feats[i];
    };

    const std::size_t all = v.t * (v.t - 1) / 2;
    double sum = 0.0;
    if (all <= cfg.sample_pairs) {
        for (std::size_t i = 0; i < v.t; ++i) {
            for (std::size_t j = i + 1; j < v.t; ++j) {
                sum += cosine(get(i), get(j));
            }
        }
        return sum / static_cast<double>(all);
    }
    std::mt19937_64 rng(cfg.seed);
    for (std::size_t p = 0; p < cfg.sample_pairs; ++p) {
        const std::size_t i = rng() % v.t;
        std::size_t j = rng() % (v.t - 1);
        if (j >= i) ++j;
        sum += cosine(get(i), get(j));
    }
    return sum / static_cast<double>(cfg.sample_pairs);
}

std::uint64_t seed_for_id(const std::string& id) {
    return std::stoull(io::fnv1a_hex(id), nullptr, 16);
}

// ---------------------------------------------------------------- filtering

FilterReport filter_manifest(std::vector<ManifestEntry>& entries, double threshold) {
    if (!std::isfinite(threshold)) {
        throw ConfigError("threshold must be finite");
    }
    FilterReport r;
    for (auto& e : entries) {
        if (e.status == Status::failed) {
            ++r.failed;
        } else if (!e.frame_similarity) {
            e.status = Status::pending;
            ++r.pending;
            r.warnings.push_back(e.id + ": no frame similarity, left pending");
        } else if (*e.frame_similarity < threshold) {
            e.status = Status::kept;
            ++r.kept;
        } else {
            e.status = Status::filtered;
            ++r.filtered;
        }
    }
    return r;
}

// ---------------------------------------------------------------- vocals

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

}  // namespace

void mark_vocals(ManifestEntry& entry, const std::optional<std::string>& command_template) {
    entry.vocals_removed = false;
    if (!command_template) {
        return;
    }
    if (!fs::exists(entry.audio)) {
        entry.status = Status::failed;
        entry.error = "audio file not found: " + entry.audio;
        return;
    }
    std::string cmd = *command_template;
    const std::string quoted = shell_quote(entry.audio);
    for (std::size_t pos = cmd.find("{audio}"); pos != std::string::npos; pos = cmd.find("{audio}", pos + quoted.size())) {
        cmd.replace(pos, 7, quoted);
    }
    const int rc = std::system(cmd.c_str());
    if (rc == 0) {
        entry.vocals_removed = true;
        return;
    }
    entry.status = Status::failed;
    entry.error = "vocal separator exited with status " +
                  std::to_string(rc != -1 && WIFEXITED(rc) ? WEXITSTATUS(rc) : rc);
}

// ---------------------------------------------------------------- pipeline

motion::FrameSeq load_video(const fs::path& path, double fps) {
    if (path.extension() == ".fseq") {
        return motion::load_fseq(path);
    }
    return motion::read_image_dir(path, fps);
}

namespace {

std::string video_digest(const fs::path& path) {
    std::error_code ec;
    if (fs::is_regular_file(path, ec)) {
        return io::fnv1a_hex(io::read_file(path));
    }
    if (!fs::is_directory(path, ec)) {
        return "missing";
    }
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(path)) {
        if (f.is_regular_file()) files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    std::string joined;
    for (const auto& f : files) {
        joined += f.filename().string() + ":" + io::fnv1a_hex(io::read_file(f)) + ";";
    }
    return io::fnv1a_hex(joined);
}

struct Outcome {
    std::optional<double> similarity;
    double duration_s = 0.0;
    bool vocals_removed = false;
    bool failed = false;
    std::string error;
};

json outcome_json(const std::string& key, const std::string& id, const Outcome& o) {
    return {{"key", key},
            {"id", id},
            {"frame_similarity", o.similarity ? json(*o.similarity) : json(nullptr)},
            {"duration_s", o.duration_s},
            {"vocals_removed", o.vocals_removed},
            {"failed", o.failed},
            {"error", o.error}};
}

// Complete journal records by key. A torn final line (no newline) is cut off.
std::map<std::string, Outcome> load_journal(const fs::path& path) {
    std::map<std::string, Outcome> out;
    if (!fs::exists(path)) {
        return out;
    }
    const std::string text = io::read_file(path);
    const std::size_t complete = text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1;
    if (complete != text.size()) {
        fs::resize_file(path, complete);
    }
    std::size_t pos = 0;
    while (pos < complete) {
        const std::size_t end = text.find('\n', pos);
        const std::string line = text.substr(pos, end - pos);
        try {
            const json j = json::parse(line);
            Outcome o;
            if (!j.at("frame_similarity").is_null()) {
                o.similarity = j.at("frame_similarity").get<double>();
            }
            o.duration_s = j.at("duration_s").get<double>();
            o.vocals_removed = j.at("vocals_removed").get<bool>();
            o.failed = j.at("failed").get<bool>();
            o.error = j.at("error").get<std::string>();
            out[j.at("key").get<std::string>()] = o;
        } catch (const json::exception& ex) {
            throw FormatError(path.string(), static_cast<long long>(pos), ex.what());
        }
        pos = end + 1;
    }
    return out;
}

Outcome process(const ManifestEntry& in, const fs::path& base, const PipelineConfig& cfg) {
    Outcome o;
    o.duration_s = in.duration_s;
    try {
        const fs::path video = fs::path(in.video).is_absolute() ? fs::path(in.video) : base / in.video;
        const motion::FrameSeq v = load_video(video, cfg.video_fps);
        if (o.duration_s <= 0.0) {
            o.duration_s = static_cast<double>(v.t) / v.fps;
        }
        SimilarityConfig sc;
        sc.sample_pairs = cfg.sample_pairs;
        sc.seed = seed_for_id(in.id);
        o.similarity = frame_similarity(v, sc);
    } catch (const Error& ex) {
        o.failed = true;
        o.error = ex.what();
        return o;
    }
    ManifestEntry tmp = in;
    tmp.audio = fs::path(in.audio).is_absolute() || in.audio.empty() ? in.audio : (base / in.audio).string();
    tmp.status = Status::pending;
    mark_vocals(tmp, cfg.separator);
    o.vocals_removed = tmp.vocals_removed;
    if (tmp.status == Status::failed) {
        o.failed = true;
        o.error = tmp.error;
    }
    return o;
}

}  // namespace

PipelineResult run_pipeline(const fs::path& manifest, const fs::path& out_dir, const PipelineConfig& cfg,
                            const std::function<void(std::size_t)>& on_record) {
    if (!std::isfinite(cfg.threshold) || cfg.sample_pairs == 0) {
        throw ConfigError("curation needs a finite threshold and sample_pairs >= 1");
    }
    const std::vector<ManifestEntry> input = read_manifest(manifest);
    const fs::path base = manifest.parent_path();
    fs::create_directories(out_dir);
    const fs::path journal_path = out_dir / "journal.jsonl";
    auto journal = load_journal(journal_path);

    const std::string settings = "pairs=" + std::to_string(cfg.sample_pairs) +
                                 ";separator=" + cfg.separator.value_or("") + ";fps=" + json(cfg.video_fps).dump();
    std::vector<std::string> keys(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) {
        ManifestEntry canon = input[i];
        canon.status = Status::pending;
        canon.frame_similarity.reset();
        canon.error.clear();
        const fs::path video = fs::path(canon.video).is_absolute() ? fs::path(canon.video) : base / canon.video;
        keys[i] = io::fnv1a_hex(entry_json(canon) + "\n" + video_digest(video) + "\n" + settings);
    }

    PipelineResult result;
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (journal.count(keys[i])) {
            ++result.reused;
        } else if (std::find_if(todo.begin(), todo.end(), [&](std::size_t j) { return keys[j] == keys[i]; }) ==
                   todo.end()) {
            todo.push_back(i);
        }
    }

    std::ofstream log(journal_path, std::ios::app | std::ios::binary);
    if (!log) {
        throw FormatError(journal_path.string() + ": cannot open journal for appending");
    }
    std::size_t appended = 0;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t n = 0; n < todo.size(); ++n) {
        const std::size_t i = todo[n];
        const Outcome o = process(input[i], base, cfg);
        const std::string line = outcome_json(keys[i], input[i].id, o).dump() + "\n";
#pragma omp critical(beatforge_curate_journal)
        {
            log.write(line.data(), static_cast<std::streamsize>(line.size()));
            log.flush();
            journal[keys[i]] = o;
            ++appended;
            if (on_record) {
                on_record(appended);
            }
        }
    }
    result.processed = appended;

    for (std::size_t i = 0; i < input.size(); ++i) {
        const Outcome& o = journal.at(keys[i]);
        ManifestEntry e = input[i];
        e.frame_similarity = o.similarity;
        e.duration_s = o.duration_s;
        e.vocals_removed = o.vocals_removed;
        e.status = o.failed ? Status::failed : Status::pending;
        e.error = o.error;
        result.entries.push_back(std::move(e));
    }
    result.report = filter_manifest(result.entries, cfg.threshold);

    const fs::path tmp = out_dir / "manifest.jsonl.tmp";
    io::write_file(tmp, format_manifest(result.entries));
    fs::rename(tmp, out_dir / "manifest.jsonl");
    const json summary = {{"threshold", cfg.threshold},
                          {"sample_pairs", cfg.sample_pairs},
                          {"kept", result.report.kept},
                          {"filtered", result.report.filtered},
                          {"failed", result.report.failed},
                          {"pending", result.report.pending},
                          {"entries", result.entries.size()}};
    io::write_file(out_dir / "summary.json", summary.dump(2) + "\n");
    return result;
}

}  // namespace beatforge::curate
