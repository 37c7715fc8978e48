#include "cli.hpp"

#include "beatforge/align.hpp"
#include "beatforge/binary_io.hpp"
#include "beatforge/checkpoint.hpp"
#include "beatforge/codec.hpp"
#include "beatforge/curate.hpp"
#include "beatforge/error.hpp"
#include "beatforge/model.hpp"
#include "beatforge/motion.hpp"
#include "beatforge/signal.hpp"
#include "beatforge/timeline.hpp"
#include "selfcheck.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>

namespace beatforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- provenance

std::string digest_path(const fs::path& p) {
    std::error_code ec;
    if (fs::is_regular_file(p, ec)) {
        return io::fnv1a_hex(io::read_file(p));
    }
    if (fs::is_directory(p, ec)) {
        std::vector<fs::path> files;
        for (const auto& f : fs::recursive_directory_iterator(p)) {
            if (f.is_regular_file() && f.path().filename() != "run.json") files.push_back(f.path());
        }
        std::sort(files.begin(), files.end());
        std::string joined;
        for (const auto& f : files) {
            joined += fs::relative(f, p).generic_string() + ":" + io::fnv1a_hex(io::read_file(f)) + ";";
        }
        return io::fnv1a_hex(joined);
    }
    return "missing";
}

class Provenance {
public:
    explicit Provenance(std::string command) : command_(std::move(command)) {}

    void input(const fs::path& p) { inputs_.push_back({{"path", p.generic_string()}, {"fnv1a", digest_path(p)}}); }
    void output(const fs::path& p) { outputs_.push_back(p); }
    json& config() { return config_; }

    // Written after the outputs so their hashes are final.
    void write(const fs::path& dir) const {
        json outs = json::array();
        for (const auto& p : outputs_) {
            outs.push_back({{"path", p.generic_string()}, {"fnv1a", digest_path(p)}});
        }
        const json j = {{"command", command_}, {"version", kVersion}, {"inputs", inputs_},
                        {"outputs", outs},     {"config", config_}};
        fs::create_directories(dir.empty() ? fs::path(".") : dir);
        io::write_file((dir.empty() ? fs::path(".") : dir) / "run.json", j.dump(2) + "\n");
    }

private:
    std::string command_;
    json inputs_ = json::array();
    std::vector<fs::path> outputs_;
    json config_ = json::object();
};

fs::path dir_of(const fs::path& file) { return file.parent_path().empty() ? fs::path(".") : file.parent_path(); }

void ensure_parent(const fs::path& file) {
    if (!file.parent_path().empty()) fs::create_directories(file.parent_path());
}

// Explicit flag, then BEATFORGE_SEED, then the configured value.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t configured) {
    if (flag) return *flag;
    if (const char* env = std::getenv("BEATFORGE_SEED"); env && *env) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (*end != '\0') {
            throw UsageError(std::string("BEATFORGE_SEED is not an unsigned integer: '") + env + "'");
        }
        return v;
    }
    return configured;
}

json read_json(const fs::path& path) {
    const std::string text = io::read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string(), static_cast<long long>(e.byte), e.what());
    }
}

template <typename T>
void take(const json& j, const char* key, T& out, const fs::path& source) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(source.string() + ": key '" + key + "': " + e.what());
    }
}

template <typename T>
void override_with(const std::optional<T>& flag, T& out) {
    if (flag) out = *flag;
}

// ---------------------------------------------------------------- world directories

struct WorldClip {
    std::string id;
    std::size_t genre = 0;
    motion::FrameSeq video;
    codec::TokenGrid music;
    VideoBeats video_beats;
    BeatTrack music_beats;
};

std::vector<WorldClip> load_world(const fs::path& dir, Provenance& prov, std::size_t from = 0,
                                  std::size_t count = 0) {
    const fs::path index = dir / "world.json";
    prov.input(index);
    const json j = read_json(index);
    if (!j.contains("clips") || !j.at("clips").is_array()) {
        throw FormatError(index.string() + ": missing 'clips' array");
    }
    const auto& clips = j.at("clips");
    if (from > clips.size()) {
        throw ContractError("world has " + std::to_string(clips.size()) + " clips, cannot start at " +
                            std::to_string(from));
    }
    const std::size_t end = count == 0 ? clips.size() : std::min(clips.size(), from + count);
    std::vector<WorldClip> out;
    for (std::size_t i = from; i < end; ++i) {
        const auto& c = clips[i];
        WorldClip w;
        try {
            w.id = c.at("id").get<std::string>();
            w.genre = c.at("genre").get<std::size_t>();
            w.video = motion::load_fseq(dir / c.at("video").get<std::string>());
            w.music = codec::load_grid(dir / c.at("music").get<std::string>());
            w.video_beats.beats = csv::read_beats(dir / c.at("video_beats").get<std::string>());
            w.music_beats.beats = csv::read_beats(dir / c.at("music_beats").get<std::string>());
        } catch (const json::exception& e) {
            throw FormatError(index.string() + ": clip " + std::to_string(i) + ": " + e.what());
        }
        out.push_back(std::move(w));
    }
    return out;
}

// ---------------------------------------------------------------- model directories

void save_model_dir(const fs::path& dir, const model::Model& m) {
    fs::create_directories(dir);
    io::write_file(dir / "model.json", model::model_config_json(m.config()) + "\n");
    nn::save_checkpoint(dir / "model.vmap", m.params());
}

model::Model load_model_dir(const fs::path& dir, Provenance& prov) {
    prov.input(dir / "model.json");
    prov.input(dir / "model.vmap");
    model::Model m(model::load_model_config(dir / "model.json"));
    nn::load_checkpoint(dir / "model.vmap", m.params());
    return m;
}

std::string fixed(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", x);
    return buf;
}

// ---------------------------------------------------------------- commands

struct BeatsOpts {
    std::string input, output;
    std::size_t window = 1024, peak_window = 3;
    double threshold_k = 1.5;
};

void cmd_beats(const BeatsOpts& o, std::ostream& out) {
    Provenance prov("beats");
    prov.input(o.input);
    signal::OnsetConfig cfg;
    cfg.window = o.window;
    cfg.peak_window = o.peak_window;
    cfg.threshold_k = o.threshold_k;
    const auto wave = signal::read_wav(o.input);
    const BeatTrack beats = signal::detect_beats(wave, cfg);
    ensure_parent(o.output);
    csv::write_beats(o.output, beats.beats);
    prov.output(o.output);
    prov.config() = {{"window", cfg.window}, {"hop", signal::token_hop(wave.sample_rate)},
                     {"peak_window", cfg.peak_window}, {"threshold_k", cfg.threshold_k}};
    prov.write(dir_of(o.output));
    out << beats.count() << " beats over " << beats.size() << " frames\n";
}

struct VbeatsOpts {
    std::string input, output, envelope;
    double fps = 25.0;
    std::string estimator = "frame-difference";
    std::size_t delta = 3;
    std::size_t t_a = 0;
    bool normalize = false;
};

void cmd_vbeats(const VbeatsOpts& o, std::ostream& out) {
    Provenance prov("vbeats");
    prov.input(o.input);
    const motion::FrameSeq v = curate::load_video(o.input, o.fps);
    motion::MotionConfig cfg;
    cfg.estimator = motion::parse_estimator(o.estimator);
    cfg.delta = o.delta;
    cfg.normalize = o.normalize;
    const std::size_t t_a = o.t_a == 0 ? motion::video_timeline_length(v) : o.t_a;
    const auto a = motion::analyze_video(v, t_a, cfg);
    ensure_parent(o.output);
    csv::write_beats(o.output, a.beats.beats);
    prov.output(o.output);
    if (!o.envelope.empty()) {
        ensure_parent(o.envelope);
        io::write_file(o.envelope, csv::format_real(a.envelope.values, "envelope"));
        prov.output(o.envelope);
    }
    prov.config() = {{"estimator", motion::estimator_name(cfg.estimator)},
                     {"delta", cfg.delta},
                     {"t_a", t_a},
                     {"normalize", cfg.normalize},
                     {"fps", v.fps}};
    prov.write(dir_of(o.output));
    out << a.beats.count() << " video beats over " << t_a << " frames\n";
}

struct AlignOpts {
    std::string pv, pa, config, output, metrics;
    std::optional<std::size_t> delta;
    std::optional<double> alpha;
};

void cmd_align(const AlignOpts& o, std::ostream& out) {
    Provenance prov("align");
    align::AlignConfig cfg;
    if (!o.config.empty()) {
        prov.input(o.config);
        const json j = read_json(o.config);
        take(j, "delta", cfg.delta, o.config);
        take(j, "alpha", cfg.alpha, o.config);
    }
    override_with(o.delta, cfg.delta);
    override_with(o.alpha, cfg.alpha);
    cfg.validate();
    prov.input(o.pv);
    prov.input(o.pa);
    const VideoBeats pv{csv::read_beats(o.pv)};
    const BeatTrack pa{csv::read_beats(o.pa)};
    const auto w = align::overlap_weights(pv, pa, cfg);
    ensure_parent(o.output);
    io::write_file(o.output, csv::format_real(w.weights, "weight"));
    prov.output(o.output);

    const auto score = align::mv_align_score(pa, pv, cfg.delta);
    const std::size_t ones = static_cast<std::size_t>(std::count(w.weights.begin(), w.weights.end(), 1.0));
    const json metrics = {{"frames", w.size()},
                          {"video_beats", pv.count()},
                          {"music_beats", pa.count()},
                          {"aligned_frames", ones},
                          {"mv_align_f1", score.f1},
                          {"mv_align_precision", score.precision},
                          {"mv_align_recall", score.recall}};
    const std::string blob = metrics.dump(2) + "\n";
    if (!o.metrics.empty()) {
        ensure_parent(o.metrics);
        io::write_file(o.metrics, blob);
        prov.output(o.metrics);
    } else {
        out << blob;
    }
    prov.config() = {{"delta", cfg.delta}, {"alpha", cfg.alpha}};
    prov.write(dir_of(o.output));
}

struct TokenizeOpts {
    std::string input, output, codebooks, save_codebooks;
    std::size_t books = 4, vocab = 32, bands = 32, iterations = 25;
    std::optional<std::uint64_t> seed;
};

void cmd_tokenize(const TokenizeOpts& o, std::ostream& out) {
    Provenance prov("tokenize");
    prov.input(o.input);
    const auto wave = signal::read_wav(o.input);
    const Tensor feats = codec::audio_features(wave, o.bands);
    codec::Codebooks cb;
    json cfg = {{"bands", o.bands}};
    if (!o.codebooks.empty()) {
        prov.input(o.codebooks);
        cb = codec::load_codebooks(o.codebooks);
        cfg["codebooks"] = o.codebooks;
    } else {
        codec::RvqConfig rc;
        rc.iterations = o.iterations;
        rc.seed = resolve_seed(o.seed, 0);
        cb = codec::rvq_train(feats, o.books, o.vocab, rc);
        cfg.update({{"books", o.books}, {"vocab", o.vocab}, {"iterations", rc.iterations}, {"seed", rc.seed}});
    }
    const codec::TokenGrid grid = codec::quantize(feats, cb);
    ensure_parent(o.output);
    codec::save_grid(o.output, grid);
    prov.output(o.output);
    if (!o.save_codebooks.empty()) {
        ensure_parent(o.save_codebooks);
        codec::save_codebooks(o.save_codebooks, cb);
        prov.output(o.save_codebooks);
    }
    const double err = codec::reconstruction_error(feats, grid, cb, cb.k());
    cfg["reconstruction_mse"] = err;
    prov.config() = cfg;
    prov.write(dir_of(o.output));
    out << grid.t_a << " frames x " << grid.k << " books, reconstruction mse " << err << "\n";
}

struct CurateOpts {
    std::string manifest, out_dir, separator;
    double threshold = 0.7;
    std::size_t pairs = 64;
    double fps = 25.0;
};

void cmd_curate(const CurateOpts& o, std::ostream& out, std::ostream& err) {
    Provenance prov("curate");
    prov.input(o.manifest);
    curate::PipelineConfig cfg;
    cfg.threshold = o.threshold;
    cfg.sample_pairs = o.pairs;
    cfg.video_fps = o.fps;
    if (!o.separator.empty()) cfg.separator = o.separator;
    const auto r = curate::run_pipeline(o.manifest, o.out_dir, cfg);
    for (const auto& w : r.report.warnings) err << "warning: " << w << "\n";
    prov.output(fs::path(o.out_dir) / "manifest.jsonl");
    prov.output(fs::path(o.out_dir) / "summary.json");
    prov.config() = {{"threshold", cfg.threshold},
                     {"sample_pairs", cfg.sample_pairs},
                     {"separator", o.separator},
                     {"fps", cfg.video_fps}};
    prov.write(o.out_dir);
    out << "kept " << r.report.kept << ", filtered " << r.report.filtered << ", failed " << r.report.failed
        << ", pending " << r.report.pending << " (" << r.reused << " from journal)\n";
}

struct SynthOpts {
    std::string out_dir;
    std::size_t clips = 200;
    std::optional<std::uint64_t> seed;
};

void cmd_synth_world(const SynthOpts& o, std::ostream& out) {
    Provenance prov("synth-world");
    model::WorldConfig wc;
    wc.clips = o.clips;
    wc.seed = resolve_seed(o.seed, wc.seed);
    const auto world = model::synthetic_world(wc);
    const fs::path dir = o.out_dir;
    fs::create_directories(dir);
    json clips = json::array();
    for (std::size_t i = 0; i < world.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "clip%04zu", i);
        const std::string s = id;
        motion::save_fseq(dir / (s + ".fseq"), world[i].video);
        codec::save_grid(dir / (s + ".tgrd"), world[i].music);
        csv::write_beats(dir / (s + ".vb.csv"), world[i].video_beats.beats);
        csv::write_beats(dir / (s + ".mb.csv"), world[i].music_beats.beats);
        clips.push_back({{"id", s},
                         {"genre", world[i].genre},
                         {"video", s + ".fseq"},
                         {"music", s + ".tgrd"},
                         {"video_beats", s + ".vb.csv"},
                         {"music_beats", s + ".mb.csv"}});
    }
    prov.config() = {{"clips", wc.clips},       {"seed", wc.seed},       {"frames", wc.frames},
                     {"fps", wc.fps},           {"size", wc.size},       {"genres", wc.genres},
                     {"vocab", wc.vocab},       {"books", wc.books},     {"delta", wc.delta},
                     {"beat_prob", wc.beat_prob}, {"offbeat_prob", wc.offbeat_prob},
                     {"token_noise", wc.token_noise}};
    io::write_file(dir / "world.json", json{{"config", prov.config()}, {"clips", clips}}.dump(2) + "\n");
    prov.output(dir);
    prov.write(dir);
    out << world.size() << " clips written to " << dir.generic_string() << "\n";
}

struct TrainOpts {
    std::string world, out_dir, config, model_config;
    std::size_t clips = 0;
    std::optional<std::size_t> epochs, batch, warmup, delta;
    std::optional<double> lr, alpha, beta;
    std::optional<std::uint64_t> seed;
};

void cmd_train(const TrainOpts& o, std::ostream& out, std::ostream& err) {
    Provenance prov("train");
    model::TrainConfig tc;
    std::uint64_t configured_seed = tc.seed;
    if (!o.config.empty()) {
        prov.input(o.config);
        const json j = read_json(o.config);
        take(j, "epochs", tc.epochs, o.config);
        take(j, "batch", tc.batch, o.config);
        take(j, "lr", tc.lr, o.config);
        take(j, "warmup", tc.warmup, o.config);
        take(j, "alpha", tc.loss.align.alpha, o.config);
        take(j, "beta", tc.loss.beta, o.config);
        take(j, "delta", tc.loss.align.delta, o.config);
        take(j, "seed", configured_seed, o.config);
    }
    override_with(o.epochs, tc.epochs);
    override_with(o.batch, tc.batch);
    override_with(o.lr, tc.lr);
    override_with(o.warmup, tc.warmup);
    override_with(o.alpha, tc.loss.align.alpha);
    override_with(o.beta, tc.loss.beta);
    override_with(o.delta, tc.loss.align.delta);
    tc.seed = resolve_seed(o.seed, configured_seed);
    tc.loss.align.validate();

    model::ModelConfig mc;
    if (!o.model_config.empty()) {
        prov.input(o.model_config);
        mc = model::load_model_config(o.model_config);
    }
    mc.seed = tc.seed;

    const auto world = load_world(o.world, prov, 0, o.clips);
    std::vector<model::Example> data;
    for (const auto& c : world) {
        const auto w = align::overlap_weights(c.video_beats, c.music_beats, tc.loss.align);
        data.push_back(model::make_example(c.video, c.music, w, c.video_beats, mc.encoder));
    }
    model::Model m(mc);
    const fs::path dir = o.out_dir;
    fs::create_directories(dir);
    std::string log;
    model::train(m, data, tc, [&](const model::EpochMetrics& e) {
        log += model::metrics_json(e) + "\n";
        err << "epoch " << e.epoch << "  L_g " << fixed(e.generative) << "  L_c " << fixed(e.contrastive)
            << "  beat acc " << fixed(e.beat_token_accuracy) << "\n";
    });
    io::write_file(dir / "metrics.jsonl", log);
    save_model_dir(dir, m);
    prov.output(dir / "metrics.jsonl");
    prov.output(dir / "model.json");
    prov.output(dir / "model.vmap");
    prov.config() = {{"clips", data.size()},   {"epochs", tc.epochs},
                     {"batch", tc.batch},      {"lr", tc.lr},
                     {"warmup", tc.warmup},    {"alpha", tc.loss.align.alpha},
                     {"beta", tc.loss.beta},   {"delta", tc.loss.align.delta},
                     {"seed", tc.seed},        {"model", json::parse(model::model_config_json(mc))}};
    prov.write(dir);
    out << "trained on " << data.size() << " clips, model in " << dir.generic_string() << "\n";
}

struct GenerateOpts {
    std::string model_dir, video, output, beats_out;
    double fps = 25.0;
    std::size_t t_a = 0;
    double temperature = 1.0;
    std::size_t top_k = 0;
    std::optional<std::uint64_t> seed;
};

void cmd_generate(const GenerateOpts& o, std::ostream& out) {
    Provenance prov("generate");
    model::Model m = load_model_dir(o.model_dir, prov);
    prov.input(o.video);
    const motion::FrameSeq v = curate::load_video(o.video, o.fps);
    const auto& d = m.config().decoder;
    const std::size_t t_a = o.t_a == 0 ? d.max_steps + 1 - d.books : o.t_a;
    model::SamplingConfig sc{o.temperature, o.top_k, resolve_seed(o.seed, 1)};
    const auto grid = model::generate(m, model::stem_patches(v, m.config().encoder), t_a, sc);
    ensure_parent(o.output);
    codec::save_grid(o.output, grid);
    prov.output(o.output);
    const BeatTrack beats = model::beats_from_tokens(grid);
    if (!o.beats_out.empty()) {
        ensure_parent(o.beats_out);
        csv::write_beats(o.beats_out, beats.beats);
        prov.output(o.beats_out);
    }
    prov.config() = {{"t_a", t_a}, {"temperature", sc.temperature}, {"top_k", sc.top_k}, {"seed", sc.seed}};
    prov.write(dir_of(o.output));
    out << t_a << " frames generated, " << beats.count() << " beat tokens\n";
}

struct RetrieveOpts {
    std::string model_dir, world, output;
    std::size_t from = 0, count = 0;
};

void cmd_retrieve(const RetrieveOpts& o, std::ostream& out) {
    Provenance prov("retrieve");
    model::Model m = load_model_dir(o.model_dir, prov);
    const auto world = load_world(o.world, prov, o.from, o.count);
    std::vector<Tensor> queries;
    std::vector<codec::TokenGrid> candidates;
    for (const auto& c : world) {
        queries.push_back(model::stem_patches(c.video, m.config().encoder));
        candidates.push_back(c.music);
    }
    const auto r = model::retrieve(m, queries, candidates);
    json j = {{"candidates", candidates.size()}, {"true_rank", r.true_rank}};
    std::string summary;
    for (std::size_t k : {1, 5, 10}) {
        if (k <= candidates.size()) {
            j["recall_at_" + std::to_string(k)] = r.recall_at(k);
            summary += "R@" + std::to_string(k) + " " + fixed(r.recall_at(k)) + "  ";
        }
    }
    ensure_parent(o.output);
    io::write_file(o.output, j.dump(2) + "\n");
    prov.output(o.output);
    prov.config() = {{"from", o.from}, {"count", candidates.size()}};
    prov.write(dir_of(o.output));
    out << summary << "over " << candidates.size() << " candidates\n";
}

struct EvalOpts {
    std::vector<std::string> generated, pv;
    std::size_t delta = 3;
    std::string output;
};

void cmd_eval_mvalign(const EvalOpts& o, std::ostream& out) {
    if (o.generated.size() != o.pv.size()) {
        throw UsageError("--generated and --pv must be given the same number of times");
    }
    Provenance prov("eval-mvalign");
    std::vector<align::AlignScore> scores;
    for (std::size_t i = 0; i < o.generated.size(); ++i) {
        prov.input(o.generated[i]);
        prov.input(o.pv[i]);
        scores.push_back(align::mv_align_score(BeatTrack{csv::read_beats(o.generated[i])},
                                               VideoBeats{csv::read_beats(o.pv[i])}, o.delta));
    }
    const auto s = align::combine_scores(scores);
    const json j = {{"metric", "MV-Align (F1, +-delta)"},
                    {"delta", o.delta},
                    {"clips", scores.size()},
                    {"f1", s.f1},
                    {"precision", s.precision},
                    {"recall", s.recall},
                    {"video_beats", s.video_beats},
                    {"music_beats", s.music_beats}};
    const std::string blob = j.dump(2) + "\n";
    if (!o.output.empty()) {
        ensure_parent(o.output);
        io::write_file(o.output, blob);
        prov.output(o.output);
    }
    out << blob;
    prov.config() = {{"delta", o.delta}};
    prov.write(o.output.empty() ? fs::path(".") : dir_of(o.output));
}

int cmd_selfcheck(const std::string& out_dir, std::ostream& out) {
    Provenance prov("selfcheck");
    const auto results = oracle::run_selfcheck();
    bool all = true;
    json j = json::array();
    for (const auto& r : results) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << "\n";
        all = all && r.passed;
        j.push_back({{"suite", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    }
    prov.config() = {{"suites", j}};
    prov.write(out_dir);
    return all ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"beatforge: beat-aligned video-to-music toolkit"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    BeatsOpts beats;
    auto* s_beats = app.add_subcommand("beats", "Detect music beats on the 50 Hz timeline");
    s_beats->add_option("input", beats.input, "WAV file")->required();
    s_beats->add_option("-o,--output", beats.output, "Beat CSV")->required();
    s_beats->add_option("--window", beats.window, "STFT window");
    s_beats->add_option("--peak-window", beats.peak_window, "Half-width of the peak picker");
    s_beats->add_option("--threshold-k", beats.threshold_k, "Deviations above the local mean");

    VbeatsOpts vb;
    auto* s_vb = app.add_subcommand("vbeats", "Detect video beats from motion");
    s_vb->add_option("input", vb.input, "FSEQ file or directory of numbered PPM frames")->required();
    s_vb->add_option("-o,--output", vb.output, "Video-beat CSV")->required();
    s_vb->add_option("--envelope", vb.envelope, "Also write the motion envelope CSV");
    s_vb->add_option("--fps", vb.fps, "Frame rate for image directories");
    s_vb->add_option("--estimator", vb.estimator, "frame-difference or dense-flow");
    s_vb->add_option("--delta", vb.delta, "Peak window half-width");
    s_vb->add_option("--t-a", vb.t_a, "Timeline length (default: duration x 50)");
    s_vb->add_flag("--normalize", vb.normalize, "Scale the envelope to unit maximum");

    AlignOpts al;
    auto* s_al = app.add_subcommand("align", "Alignment weights from video and music beats");
    s_al->add_option("--pv", al.pv, "Video-beat CSV")->required();
    s_al->add_option("--pa", al.pa, "Music-beat CSV")->required();
    s_al->add_option("--config", al.config, "JSON with delta and alpha");
    s_al->add_option("--delta", al.delta, "Window half-width");
    s_al->add_option("--alpha", al.alpha, "Weight of unaligned frames");
    s_al->add_option("-o,--output", al.output, "Weights CSV")->required();
    s_al->add_option("--metrics", al.metrics, "Metrics JSON (default: stdout)");

    TokenizeOpts tk;
    auto* s_tk = app.add_subcommand("tokenize", "Quantize audio into an RVQ token grid");
    s_tk->add_option("input", tk.input, "WAV file")->required();
    s_tk->add_option("-o,--output", tk.output, "Token grid (.tgrd)")->required();
    s_tk->add_option("--codebooks", tk.codebooks, "Existing codebooks (.rvqc); trained on the input otherwise");
    s_tk->add_option("--save-codebooks", tk.save_codebooks, "Write the codebooks used");
    s_tk->add_option("--books", tk.books, "Residual stages K");
    s_tk->add_option("--vocab", tk.vocab, "Codes per stage");
    s_tk->add_option("--bands", tk.bands, "Mel bands");
    s_tk->add_option("--iterations", tk.iterations, "k-means iterations");
    s_tk->add_option("--seed", tk.seed, "Initialisation seed");

    CurateOpts cu;
    auto* s_cu = app.add_subcommand("curate", "Frame-similarity filtering of a JSONL manifest");
    s_cu->add_option("--manifest", cu.manifest, "Input manifest")->required();
    s_cu->add_option("--out", cu.out_dir, "Output directory")->required();
    s_cu->add_option("--threshold", cu.threshold, "Keep clips strictly below this similarity");
    s_cu->add_option("--pairs", cu.pairs, "Sampled frame pairs per video");
    s_cu->add_option("--separator", cu.separator, "Vocal separation command, {audio} is replaced");
    s_cu->add_option("--fps", cu.fps, "Frame rate for image directories");

    SynthOpts sw;
    auto* s_sw = app.add_subcommand("synth-world", "Write the synthetic video/music world");
    s_sw->add_option("--out", sw.out_dir, "Output directory")->required();
    s_sw->add_option("--clips", sw.clips, "Number of clips");
    s_sw->add_option("--seed", sw.seed, "World seed");

    TrainOpts tr;
    auto* s_tr = app.add_subcommand("train", "Train the video-conditioned music model");
    s_tr->add_option("--world", tr.world, "Directory from synth-world")->required();
    s_tr->add_option("--out", tr.out_dir, "Model directory")->required();
    s_tr->add_option("--config", tr.config, "Training config JSON");
    s_tr->add_option("--model-config", tr.model_config, "Model config JSON");
    s_tr->add_option("--clips", tr.clips, "Use the first N clips (0 = all)");
    s_tr->add_option("--epochs", tr.epochs);
    s_tr->add_option("--batch", tr.batch);
    s_tr->add_option("--lr", tr.lr);
    s_tr->add_option("--warmup", tr.warmup);
    s_tr->add_option("--alpha", tr.alpha);
    s_tr->add_option("--beta", tr.beta);
    s_tr->add_option("--delta", tr.delta);
    s_tr->add_option("--seed", tr.seed);

    GenerateOpts ge;
    auto* s_ge = app.add_subcommand("generate", "Sample a token grid for a video");
    s_ge->add_option("--model", ge.model_dir, "Model directory")->required();
    s_ge->add_option("--video", ge.video, "FSEQ file or frame directory")->required();
    s_ge->add_option("-o,--output", ge.output, "Token grid (.tgrd)")->required();
    s_ge->add_option("--beats-out", ge.beats_out, "Beat CSV of the generated tokens");
    s_ge->add_option("--fps", ge.fps);
    s_ge->add_option("--t-a", ge.t_a, "Frames to generate (default: decoder maximum)");
    s_ge->add_option("--temperature", ge.temperature);
    s_ge->add_option("--top-k", ge.top_k);
    s_ge->add_option("--seed", ge.seed);

    RetrieveOpts re;
    auto* s_re = app.add_subcommand("retrieve", "Video-to-music retrieval over a world directory");
    s_re->add_option("--model", re.model_dir, "Model directory")->required();
    s_re->add_option("--world", re.world, "Directory from synth-world")->required();
    s_re->add_option("--from", re.from, "First clip");
    s_re->add_option("--count", re.count, "Number of clips (0 = rest)");
    s_re->add_option("-o,--output", re.output, "Result JSON")->required();

    EvalOpts ev;
    auto* s_ev = app.add_subcommand("eval-mvalign", "MV-Align F1 between generated and video beats");
    s_ev->add_option("--generated", ev.generated, "Generated beat CSV (repeatable)")->required();
    s_ev->add_option("--pv", ev.pv, "Video-beat CSV (repeatable, paired in order)")->required();
    s_ev->add_option("--delta", ev.delta, "Matching tolerance in frames");
    s_ev->add_option("-o,--output", ev.output, "Metrics JSON");

    std::string check_dir = ".";
    auto* s_sc = app.add_subcommand("selfcheck", "Run the oracle and gradient suites");
    s_sc->add_option("--out", check_dir, "Where to write run.json");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return static_cast<int>(ExitCode::usage);
    }

    try {
        if (s_beats->parsed()) cmd_beats(beats, out);
        else if (s_vb->parsed()) cmd_vbeats(vb, out);
        else if (s_al->parsed()) cmd_align(al, out);
        else if (s_tk->parsed()) cmd_tokenize(tk, out);
        else if (s_cu->parsed()) cmd_curate(cu, out, err);
        else if (s_sw->parsed()) cmd_synth_world(sw, out);
        else if (s_tr->parsed()) cmd_train(tr, out, err);
        else if (s_ge->parsed()) cmd_generate(ge, out);
        else if (s_re->parsed()) cmd_retrieve(re, out);
        else if (s_ev->parsed()) cmd_eval_mvalign(ev, out);
        else if (s_sc->parsed()) return cmd_selfcheck(check_dir, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::format);
    }
    return 0;
}

}  // namespace beatforge::cli
