// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run all criteria
//   acceptance 3 7        run only the listed ones
//
// Exit status is 0 only if every selected criterion passes.

#include "alignment.hpp"
#include "audio_fixtures.hpp"
#include "finite_difference.hpp"
#include "micro_model.hpp"

#include "beatforge/align.hpp"
#include "beatforge/binary_io.hpp"
#include "beatforge/codec.hpp"
#include "beatforge/curate.hpp"
#include "beatforge/error.hpp"
#include "beatforge/model.hpp"
#include "beatforge/signal.hpp"

#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

using namespace beatforge;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- pinned tolerances and budgets

constexpr double kBudget1 = 10.0;   // s
constexpr double kBudget2 = 5.0;    // s
constexpr double kBudget3 = 60.0;   // s
constexpr double kGradTol = 1e-4;   // relative
constexpr double kCeTol = 1e-12;    // alpha = 1 identity
constexpr double kLnBTol = 1e-9;    // identical contrastive rows
constexpr double kBudget5 = 5.0;    // s
constexpr double kBudget7 = 15 * 60.0;
constexpr double kRecallRatio = 1.25;
constexpr double kBudget8 = 10 * 60.0;
constexpr double kRecallAt10 = 0.30;

// Training protocol for criteria 7 and 8.
constexpr std::uint64_t kTrainWorldSeed = 7;
constexpr std::uint64_t kTestWorldSeed = 1007;
constexpr std::uint64_t kRetrievalWorldSeed = 2007;
constexpr std::size_t kTrainClips = 200;
constexpr std::size_t kTestClips = 50;
constexpr std::size_t kCandidates = 100;
constexpr std::size_t kSamplesPerClip = 2;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};

struct Outcome {
    bool passed = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// ---------------------------------------------------------------- 1

Outcome overlap_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::size_t exact = 0, boundary_cases = 0;
    const std::size_t cases = 10000;
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t n = 1 + rng() % 256;
        const int delta = 1 + static_cast<int>(rng() % 8);
        const double density = 0.02 + 0.3 * static_cast<double>(rng() % 100) / 100.0;
        auto pv = oracle::random_beats(rng, n, density);
        auto pa = oracle::random_beats(rng, n, density);
        if (c % 4 == 0) {
            // Force beats onto the first and last frames.
            pv.front() = pv.back() = 1;
            pa[rng() % std::min<std::size_t>(n, static_cast<std::size_t>(delta) + 1)] = 1;
            ++boundary_cases;
        }
        const double alpha = c % 3 == 0 ? 0.05 : 0.01 + 0.99 * static_cast<double>(rng() % 1000) / 1000.0;
        const auto w = align::overlap_weights(VideoBeats{pv}, BeatTrack{pa},
                                              align::AlignConfig{static_cast<std::size_t>(delta), alpha});
        exact += w.weights == oracle::brute_force_weights(pv, pa, delta, alpha);
    }
    const double t = seconds_since(t0);
    return {exact == cases && t < kBudget1,
            fmt("%zu/%zu exact (%zu with edge beats), %.2f s (limit %.0f s)", exact, cases, boundary_cases, t,
                kBudget1)};
}

// ---------------------------------------------------------------- 2

Outcome delay_roundtrip() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(7);
    std::size_t ok = 0, pad_ok = 0;
    const std::size_t cases = 1000;
    for (std::size_t c = 0; c < cases; ++c) {
        codec::TokenGrid g{1 + rng() % 64, 1 + c % 8, 2 + rng() % 1023, {}};
        g.tokens.resize(g.t_a * g.k);
        for (auto& x : g.tokens) x = static_cast<std::uint32_t>(rng() % g.vocab);
        const auto seq = codec::delay_interleave(g);
        std::size_t pads = 0;
        for (auto x : seq.tokens) pads += x == seq.pad();
        pad_ok += pads == g.k * (g.k - 1);
        ok += codec::deinterleave(seq) == g;
    }
    const double t = seconds_since(t0);
    return {ok == cases && pad_ok == cases && t < kBudget2,
            fmt("round trip %zu/%zu, PAD = K(K-1) %zu/%zu, K in 1..8, %.2f s (limit %.0f s)", ok, cases, pad_ok,
                cases, t, kBudget2)};
}

// ---------------------------------------------------------------- 3

Outcome gradient_fidelity() {
    const auto t0 = Clock::now();
    const auto cfg = oracle::micro_config();
    model::Model m(cfg);
    model::LossConfig loss;
    loss.beta = 0.25;
    loss.align = {1, 0.05};
    const auto batch = oracle::micro_batch(cfg, 3, 6, loss.align, 31);
    std::vector<const model::Example*> items;
    for (const auto& ex : batch.examples) items.push_back(&ex);
    m.params().zero_grad();
    model::batch_loss_and_grad(m, items, loss);
    const auto r = oracle::check_param_gradients(
        m.params(), [&] { return model::batch_loss_and_grad(m, items, loss, false).total; }, kGradTol);
    const double t = seconds_since(t0);
    const bool all = r.checked == m.params().scalar_count();
    return {r.passed() && all && t < kBudget3,
            fmt("%zu/%zu parameters within rel err %.0e (worst %.2e at %s), %.1f s (limit %.0f s)",
                r.checked - r.failed, m.params().scalar_count(), kGradTol, r.worst_rel_error,
                r.worst_location.c_str(), t, kBudget3)};
}

// ---------------------------------------------------------------- 4

Outcome degenerate_losses() {
    const auto cfg = oracle::micro_config(5);
    model::Model m(cfg);

    // alpha = 1: every frame weight is 1 and L_g is plain cross-entropy.
    model::LossConfig uniform;
    uniform.beta = 0.0;
    uniform.align = {2, 1.0};
    const auto batch = oracle::micro_batch(cfg, 4, 6, uniform.align, 41);
    std::vector<const model::Example*> items;
    for (const auto& ex : batch.examples) items.push_back(&ex);
    const double lg = model::batch_loss_and_grad(m, items, uniform, false).generative;
    double ce = 0.0, count = 0.0;
    for (const auto& ex : batch.examples) {
        nn::Graph g;
        const auto logits = m.decode(g, m.encode(g, ex.patches), ex.seq.tokens, ex.seq.steps);
        for (std::size_t s = 0; s < ex.seq.steps; ++s) {
            for (std::size_t k = 0; k < ex.seq.k; ++k) {
                const auto target = ex.seq.at(s, k);
                if (target == ex.seq.pad()) continue;
                const auto row = logits[k].value().row(s);
                double top = row[0];
                for (double x : row) top = std::max(top, x);
                double z = 0.0;
                for (double x : row) z += std::exp(x - top);
                ce += -(row[target] - top - std::log(z));
                count += 1.0;
            }
        }
    }
    ce /= count;
    const double ce_err = std::abs(lg - ce);

    // beta = 0: the contrastive embeddings receive exactly zero gradient.
    m.params().zero_grad();
    model::batch_loss_and_grad(m, items, uniform);
    std::size_t nonzero = 0, checked = 0;
    for (std::size_t k = 0; k < cfg.decoder.books; ++k) {
        for (double x : m.params().at("contrast.embed" + std::to_string(k)).grad.values()) {
            nonzero += x != 0.0;
            ++checked;
        }
    }

    // Identical rows: L_c = ln B.
    double worst_lnb = 0.0;
    std::mt19937_64 rng(43);
    std::normal_distribution<double> gauss;
    for (std::size_t b : {2, 3, 8, 32, 100}) {
        Tensor row = Tensor::matrix(1, 16);
        for (double& x : row.values()) x = gauss(rng);
        Tensor rows = Tensor::matrix(b, 16);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < 16; ++j) rows(i, j) = row(0, j);
        nn::Graph g;
        const double lc = model::contrastive_loss(g.constant(rows), g.constant(rows)).value().item();
        worst_lnb = std::max(worst_lnb, std::abs(lc - std::log(static_cast<double>(b))));
    }
    return {ce_err < kCeTol && nonzero == 0 && worst_lnb < kLnBTol,
            fmt("|L_g - CE| = %.2e (tol %.0e); nonzero contrastive grads %zu/%zu; max |L_c - ln B| = %.2e (tol %.0e)",
                ce_err, kCeTol, nonzero, checked, worst_lnb, kLnBTol)};
}

// ---------------------------------------------------------------- 5

Outcome beat_recovery() {
    const auto t0 = Clock::now();
    const double sr = 32000.0;
    const auto track = oracle::click_track(sr, 60.0, 120.0);
    const auto beats = signal::detect_beats(track.wave);
    std::vector<std::size_t> truth;
    for (auto s : track.click_samples) truth.push_back(oracle::frame_of_sample(s, sr));
    auto near = [](std::size_t a, std::size_t b) { return (a > b ? a - b : b - a) <= 1; };
    std::size_t matched = 0, spurious = 0;
    for (auto f : truth) {
        bool hit = false;
        for (std::size_t d = f == 0 ? 0 : f - 1; d <= f + 1 && d < beats.size(); ++d) hit = hit || beats.beats[d];
        matched += hit;
    }
    for (std::size_t i = 0; i < beats.size(); ++i) {
        if (!beats.beats[i]) continue;
        bool ok = false;
        for (auto f : truth) ok = ok || near(i, f);
        spurious += !ok;
    }
    const double t = seconds_since(t0);
    return {matched == truth.size() && spurious == 0 && t < kBudget5,
            fmt("%zu/%zu clicks matched within +-1 frame, %zu spurious, %zu frames, %.2f s (limit %.0f s)", matched,
                truth.size(), spurious, beats.size(), t, kBudget5)};
}

// ---------------------------------------------------------------- 6

Outcome shape_trace() {
    const std::vector<std::string> expected{"96x3x224^2", "48x56^2x96", "48x14^2x192", "48x2^2x384", "48x1^2x768"};
    std::vector<std::string> got;
    for (const auto& s : model::encoder_shape_trace(model::EncoderConfig::full_scale())) got.push_back(s.str());
    std::string joined;
    for (const auto& s : got) joined += (joined.empty() ? "" : " -> ") + s;
    return {got == expected, joined};
}

// ---------------------------------------------------------------- 7 and 8

struct TrainedModel {
    std::uint64_t seed;
    double alpha;
    std::unique_ptr<model::Model> model;
    double final_lg = 0.0;
    double train_s = 0.0;
};

std::vector<model::Example> build_examples(const std::vector<model::SyntheticClip>& world, double alpha,
                                           const model::EncoderConfig& enc) {
    std::vector<model::Example> out;
    const align::AlignConfig ac{3, alpha};
    for (const auto& c : world) {
        out.push_back(model::make_example(c.video, c.music, align::overlap_weights(c.video_beats, c.music_beats, ac),
                                          c.video_beats, enc));
    }
    return out;
}

TrainedModel train_one(const std::vector<model::SyntheticClip>& world, std::uint64_t seed, double alpha) {
    TrainedModel tm{seed, alpha, nullptr};
    model::ModelConfig mc;
    mc.seed = seed;
    tm.model = std::make_unique<model::Model>(mc);
    model::TrainConfig tc;
    tc.loss.align = {3, alpha};
    tc.seed = seed;
    const auto data = build_examples(world, alpha, mc.encoder);
    const auto t0 = Clock::now();
    const auto log = model::train(*tm.model, data, tc);
    tm.train_s = seconds_since(t0);
    tm.final_lg = log.back().generative;
    return tm;
}

double beat_recall(model::Model& m, const std::vector<model::SyntheticClip>& test, std::uint64_t seed) {
    model::BeatRecall total;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const Tensor patches = model::stem_patches(test[i].video, m.config().encoder);
        for (std::size_t s = 0; s < kSamplesPerClip; ++s) {
            const auto grid = model::generate(m, patches, test[i].music.t_a,
                                              model::SamplingConfig{1.0, 0, seed * 1000003 + i * 31 + s});
            const auto r = model::beat_token_recall(grid, test[i].video_beats);
            total.hits += r.hits;
            total.video_beats += r.video_beats;
        }
    }
    return total.value();
}

std::vector<TrainedModel> g_weighted;  // kept for criterion 8

Outcome alignment_effect() {
    const auto t0 = Clock::now();
    model::WorldConfig wc;
    wc.clips = kTrainClips;
    wc.seed = kTrainWorldSeed;
    const auto train_world = model::synthetic_world(wc);
    wc.clips = kTestClips;
    wc.seed = kTestWorldSeed;
    const auto test_world = model::synthetic_world(wc);

    double weighted_sum = 0.0, uniform_sum = 0.0, worst_lg = 0.0;
    std::string per_seed;
    g_weighted.clear();
    for (std::uint64_t seed : kSeeds) {
        TrainedModel weighted = train_one(train_world, seed, 0.05);
        TrainedModel uniform = train_one(train_world, seed, 1.0);
        const double rw = beat_recall(*weighted.model, test_world, seed);
        const double ru = beat_recall(*uniform.model, test_world, seed);
        weighted_sum += rw;
        uniform_sum += ru;
        worst_lg = std::max({worst_lg, weighted.final_lg, uniform.final_lg});
        per_seed += fmt(" [seed %llu: %.3f vs %.3f]", static_cast<unsigned long long>(seed), rw, ru);
        std::fprintf(stderr, "  criterion 7 seed %llu: weighted %.3f, uniform %.3f, train %.0f s + %.0f s\n",
                     static_cast<unsigned long long>(seed), rw, ru, weighted.train_s, uniform.train_s);
        g_weighted.push_back(std::move(weighted));
    }
    const double w = weighted_sum / 3.0, u = uniform_sum / 3.0;
    const double ratio = u > 0.0 ? w / u : (w > 0.0 ? INFINITY : 0.0);
    const double t = seconds_since(t0);
    const bool learned = worst_lg < std::log(32.0);
    return {ratio >= kRecallRatio && learned && t <= kBudget7,
            fmt("beat-token recall weighted %.3f vs uniform %.3f, ratio %.2f (need >= %.2f);%s worst final L_g %.3f "
                "(< ln 32 = %.3f); %.0f s (limit %.0f s)",
                w, u, ratio, kRecallRatio, per_seed.c_str(), worst_lg, std::log(32.0), t, kBudget7)};
}

Outcome retrieval_above_chance() {
    const auto t0 = Clock::now();
    double train_s = 0.0;
    if (g_weighted.size() != 3) {
        model::WorldConfig wc;
        wc.clips = kTrainClips;
        wc.seed = kTrainWorldSeed;
        const auto train_world = model::synthetic_world(wc);
        g_weighted.clear();
        for (std::uint64_t seed : kSeeds) g_weighted.push_back(train_one(train_world, seed, 0.05));
    }
    for (const auto& m : g_weighted) train_s += m.train_s;
    model::WorldConfig wc;
    wc.clips = kCandidates;
    wc.seed = kRetrievalWorldSeed;
    const auto world = model::synthetic_world(wc);
    std::vector<Tensor> queries;
    std::vector<codec::TokenGrid> candidates;
    for (const auto& c : world) {
        queries.push_back(model::stem_patches(c.video, g_weighted.front().model->config().encoder));
        candidates.push_back(c.music);
    }
    double r10 = 0.0, r1 = 0.0;
    std::string per_seed;
    for (auto& m : g_weighted) {
        const auto r = model::retrieve(*m.model, queries, candidates);
        r10 += r.recall_at(10) / 3.0;
        r1 += r.recall_at(1) / 3.0;
        per_seed += fmt(" %.2f", r.recall_at(10));
    }
    const double t = seconds_since(t0) + train_s;
    return {r10 >= kRecallAt10 && t <= kBudget8,
            fmt("R@10 %.3f over %zu candidates (chance 0.10, need >= %.2f; per seed%s), R@1 %.3f; %.0f s including "
                "training (limit %.0f s)",
                r10, kCandidates, kRecallAt10, per_seed.c_str(), r1, t, kBudget8)};
}

// ---------------------------------------------------------------- 9

Outcome curation() {
    std::vector<curate::ManifestEntry> fixture(3);
    const double sims[] = {0.91, 0.61, 0.70};
    const curate::Status expect[] = {curate::Status::filtered, curate::Status::kept, curate::Status::filtered};
    for (std::size_t i = 0; i < 3; ++i) {
        fixture[i].id = "fixture" + std::to_string(i);
        fixture[i].frame_similarity = sims[i];
    }
    curate::filter_manifest(fixture, 0.7);
    bool boundary = true;
    for (std::size_t i = 0; i < 3; ++i) boundary = boundary && fixture[i].status == expect[i];

    const fs::path dir = fs::temp_directory_path() / ("bf_accept_curate_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::vector<curate::ManifestEntry> entries;
    std::mt19937_64 rng(99);
    for (std::size_t i = 0; i < 12; ++i) {
        motion::FrameSeq v = motion::make_frames(10, 32, 32, 3, 25.0);
        const std::size_t pixels = 32 * 32 * 3;
        std::vector<std::uint8_t> base(pixels);
        for (auto& b : base) b = static_cast<std::uint8_t>(rng());
        for (std::size_t t = 0; t < 10; ++t) {
            for (std::size_t p = 0; p < pixels; ++p) {
                // Odd clips change a lot between frames, even clips barely move.
                const int jitter = static_cast<int>(rng() % (i % 2 ? 256 : 8));
                v.frames[t * pixels + p] = static_cast<std::uint8_t>(i % 2 ? jitter : std::min(255, base[p] + jitter));
            }
        }
        const std::string id = "clip" + std::to_string(i);
        motion::save_fseq(dir / (id + ".fseq"), v);
        entries.push_back({id, id + ".fseq", id + ".wav", 0.0, std::nullopt, false, curate::Status::pending, ""});
    }
    io::write_file(dir / "manifest.jsonl", curate::format_manifest(entries));

    const auto clean = curate::run_pipeline(dir / "manifest.jsonl", dir / "clean", {});
    const std::string expected = io::read_file(dir / "clean" / "manifest.jsonl");

    const pid_t pid = ::fork();
    if (pid == 0) {
        curate::run_pipeline(dir / "manifest.jsonl", dir / "killed", {}, [](std::size_t n) {
            if (n == 5) ::raise(SIGKILL);
        });
        ::_exit(0);
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    const bool killed = WIFSIGNALED(status) && WTERMSIG(status) == SIGKILL;
    const auto resumed = curate::run_pipeline(dir / "manifest.jsonl", dir / "killed", {});
    const bool identical = io::read_file(dir / "killed" / "manifest.jsonl") == expected;
    fs::remove_all(dir);
    return {boundary && killed && identical && resumed.reused == 5,
            fmt("0.91 -> %s, 0.61 -> %s, 0.70 -> %s; killed after 5 of 12 (%s), resumed with %zu reused, manifest "
                "%s (kept %zu, filtered %zu)",
                curate::status_name(fixture[0].status).c_str(), curate::status_name(fixture[1].status).c_str(),
                curate::status_name(fixture[2].status).c_str(), killed ? "SIGKILL" : "not killed", resumed.reused,
                identical ? "byte-identical" : "DIFFERS", clean.report.kept, clean.report.filtered)};
}

// ---------------------------------------------------------------- 10

Outcome mv_align_sanity() {
    std::mt19937_64 rng(10);
    std::size_t perfect_ok = 0, disjoint_ok = 0, exhaustive_ok = 0;
    const std::size_t cases = 1000;
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t n = 20 + rng() % 300;
        const std::size_t delta = 1 + rng() % 6;
        auto track = oracle::random_beats(rng, n, 0.05);
        track[rng() % n] = 1;
        perfect_ok += align::mv_align_score(BeatTrack{track}, VideoBeats{track}, delta).f1 == 1.0;

        // Disjoint: beats at multiples of 2(delta+1), music shifted by delta+1.
        std::vector<std::uint8_t> video(n, 0), music(n, 0);
        for (std::size_t i = 0; i + delta + 1 < n; i += 2 * (delta + 1)) {
            video[i] = 1;
            music[i + delta + 1] = 1;
        }
        disjoint_ok += align::mv_align_score(BeatTrack{music}, VideoBeats{video}, delta).f1 == 0.0;

        const auto gm = oracle::random_beats(rng, n, 0.06);
        const auto gv = oracle::random_beats(rng, n, 0.04);
        const auto s = align::mv_align_score(BeatTrack{gm}, VideoBeats{gv}, delta);
        const auto [p, r] = oracle::brute_force_pr(gm, gv, static_cast<int>(delta));
        exhaustive_ok += s.precision == p && s.recall == r;
    }
    return {perfect_ok == cases && disjoint_ok == cases && exhaustive_ok == cases,
            fmt("perfect overlap F1 = 1: %zu/%zu; disjoint F1 = 0: %zu/%zu; exhaustive matcher agreement %zu/%zu",
                perfect_ok, cases, disjoint_ok, cases, exhaustive_ok, cases)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
        {1, {"overlap weights vs brute force", overlap_oracle}},
        {2, {"delay-pattern round trip", delay_roundtrip}},
        {3, {"joint-loss gradient vs finite differences", gradient_fidelity}},
        {4, {"degenerate-loss identities", degenerate_losses}},
        {5, {"120 BPM click-track beat recovery", beat_recovery}},
        {6, {"full-scale encoder shape trace", shape_trace}},
        {7, {"alignment-weighted training raises beat-token recall", alignment_effect}},
        {8, {"retrieval above chance", retrieval_above_chance}},
        {9, {"curation threshold and resumability", curation}},
        {10, {"MV-Align metric sanity", mv_align_sanity}},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        const int c = std::atoi(argv[i]);
        if (!criteria.count(c)) {
            std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
            return 2;
        }
        selected.insert(c);
    }
    if (selected.empty()) {
        for (const auto& [id, _] : criteria) selected.insert(id);
    }
    int failures = 0;
    for (int id : selected) {
        const auto& [name, run] = criteria.at(id);
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s  %2d  %s: %s\n", o.passed ? "PASS" : "FAIL", id, name, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.passed;
    }
    std::printf("%zu/%zu criteria passed\n", selected.size() - static_cast<std::size_t>(failures), selected.size());
    return failures == 0 ? 0 : 1;
}
