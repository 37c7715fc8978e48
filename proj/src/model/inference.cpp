#include "beatforge/error.hpp"
#include "beatforge/model.hpp"
#include "beatforge/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace beatforge::model {

using nn::Graph;
using nn::Var;

namespace {

std::uint32_t sample_row(std::span<const double> logits, const SamplingConfig& cfg, std::mt19937_64& rng) {
    const std::size_t n = logits.size();
    if (cfg.temperature <= 1e-6) {
        return static_cast<std::uint32_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    }
    std::vector<std::size_t> keep(n);
    std::iota(keep.begin(), keep.end(), 0);
    if (cfg.top_k > 0 && cfg.top_k < n) {
        std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
        keep.resize(cfg.top_k);
        std::sort(keep.begin(), keep.end());
    }
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i : keep) {
        top = std::max(top, logits[i]);
    }
    std::vector<double> p(keep.size());
    double total = 0.0;
    for (std::size_t j = 0; j < keep.size(); ++j) {
        p[j] = std::exp((logits[keep[j]] - top) / cfg.temperature);
        total += p[j];
    }
    double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    for (std::size_t j = 0; j < keep.size(); ++j) {
        if (u < p[j]) {
            return static_cast<std::uint32_t>(keep[j]);
        }
        u -= p[j];
    }
    return static_cast<std::uint32_t>(keep.back());
}

}  // namespace

codec::TokenGrid generate(Model& model, const Tensor& patches, std::size_t t_a, const SamplingConfig& cfg) {
    const DecoderConfig& d = model.config().decoder;
    if (t_a == 0) {
        throw ContractError("cannot generate an empty token grid");
    }
    if (!(cfg.temperature >= 0.0)) {
        throw ConfigError("temperature must be >= 0");
    }
    Tensor video;
    {
        Graph g;
        video = model.encode(g, patches).value();
    }
    codec::InterleavedSeq seq;
    seq.k = d.books;
    seq.vocab = d.vocab;
    seq.steps = codec::interleaved_length(t_a, d.books);
    seq.tokens.assign(seq.steps * seq.k, seq.pad());
    std::mt19937_64 rng(cfg.seed);
    for (std::size_t s = 0; s < seq.steps; ++s) {
        Graph g;
        const auto logits = model.decode(g, g.constant(video), seq.tokens, s + 1);
        for (std::size_t k = 0; k < d.books; ++k) {
            if (s < k || s - k >= t_a) {
                continue;  // stays PAD
            }
            seq.at(s, k) = sample_row(logits[k].value().row(s), cfg, rng);
        }
    }
    return codec::deinterleave(seq);
}

double RetrievalResult::recall_at(std::size_t k) const {
    const std::size_t n = ranking.empty() ? 0 : ranking.front().size();
    if (k == 0 || k > n) {
        throw ContractError("recall@" + std::to_string(k) + " needs between 1 and " + std::to_string(n) + " candidates");
    }
    const auto hits = std::count_if(true_rank.begin(), true_rank.end(), [k](std::size_t r) { return r <= k; });
    return static_cast<double>(hits) / static_cast<double>(true_rank.size());
}

RetrievalResult retrieve(Model& model, const std::vector<Tensor>& query_patches,
                         const std::vector<codec::TokenGrid>& candidates) {
    if (query_patches.empty() || candidates.size() < query_patches.size()) {
        throw ContractError("retrieval needs at least one query and a candidate for every query");
    }
    auto unit = [](Tensor t) {
        double norm = 0.0;
        for (double x : t.values()) {
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm <= 1e-12) {
            throw NumericError("zero-norm embedding: cosine similarity undefined");
        }
        for (double& x : t.values()) {
            x /= norm;
        }
        return t;
    };
    std::vector<Tensor> music(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        music[c] = unit(model.pooled_music_tokens(candidates[c]));
    }
    const std::size_t nq = query_patches.size();
    RetrievalResult out;
    out.ranking.resize(nq);
    out.true_rank.resize(nq);
    std::vector<Tensor> videos(nq);
    for (std::size_t q = 0; q < nq; ++q) {
        Graph g;
        videos[q] = unit(Model::pooled_video(model.encode(g, query_patches[q])).value());
    }
#pragma omp parallel for schedule(static)
    for (std::size_t q = 0; q < nq; ++q) {
        std::vector<double> sim(candidates.size());
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            double dot = 0.0;
            for (std::size_t i = 0; i < videos[q].size(); ++i) {
                dot += videos[q][i] * music[c][i];
            }
            sim[c] = dot;
        }
        auto& rank = out.ranking[q];
        rank.resize(candidates.size());
        std::iota(rank.begin(), rank.end(), 0);
        std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
        out.true_rank[q] = static_cast<std::size_t>(std::find(rank.begin(), rank.end(), q) - rank.begin()) + 1;
    }
    return out;
}

// ---------------------------------------------------------------- synthetic world

BeatTrack beats_from_tokens(const codec::TokenGrid& grid) {
    BeatTrack out;
    out.beats.resize(grid.t_a);
    for (std::size_t t = 0; t < grid.t_a; ++t) {
        out.beats[t] = grid.at(t, 0) == kBeatToken;
    }
    return out;
}

BeatRecall beat_token_recall(const codec::TokenGrid& grid, const VideoBeats& pv) {
    if (pv.size() != grid.t_a) {
        throw ContractError("video beats and token grid differ in length");
    }
    BeatRecall r;
    for (std::size_t t = 0; t < grid.t_a; ++t) {
        if (pv.beats[t]) {
            ++r.video_beats;
            r.hits += grid.at(t, 0) == kBeatToken;
        }
    }
    return r;
}

namespace {

std::array<std::uint8_t, 3> genre_colour(std::size_t g) {
    static constexpr std::array<std::array<std::uint8_t, 3>, 8> palette{{
        {200, 40, 40}, {40, 170, 40}, {40, 40, 200}, {190, 190, 40},
        {180, 40, 180}, {40, 180, 180}, {110, 110, 110}, {230, 130, 30},
    }};
    if (g < palette.size()) {
        return palette[g];
    }
    std::mt19937 rng(static_cast<unsigned>(g));
    return {static_cast<std::uint8_t>(40 + rng() % 180), static_cast<std::uint8_t>(40 + rng() % 180),
            static_cast<std::uint8_t>(40 + rng() % 180)};
}

// Background code patterns per genre: a length-4 motif for book 0, a
// length-2 alternation for the other books.
std::vector<std::uint32_t> genre_pattern(std::size_t genre, std::size_t book, std::size_t vocab) {
    std::mt19937_64 rng(0x5eed0000u + genre * 131 + book);
    const std::size_t len = book == 0 ? 4 : 2;
    std::vector<std::uint32_t> p(len);
    for (auto& c : p) {
        c = static_cast<std::uint32_t>(1 + rng() % (vocab - 2));
    }
    return p;
}

}  // namespace

std::vector<SyntheticClip> synthetic_world(const WorldConfig& cfg) {
    if (cfg.clips == 0 || cfg.genres == 0 || cfg.vocab < 4 || cfg.books == 0 || cfg.frames < 8 ||
        cfg.square >= cfg.size || cfg.delta < 1) {
        throw ConfigError("invalid synthetic world configuration");
    }
    std::mt19937_64 rng(cfg.seed);
    auto uniform = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
    std::bernoulli_distribution coin_beat(cfg.beat_prob), coin_off(cfg.offbeat_prob), coin_noise(cfg.token_noise);
    const std::uint32_t accent = static_cast<std::uint32_t>(cfg.vocab - 1);
    std::vector<SyntheticClip> world;
    world.reserve(cfg.clips);
    for (std::size_t i = 0; i < cfg.clips; ++i) {
        SyntheticClip clip;
        clip.genre = uniform(cfg.genres);

        // Jumps between frames b and b+1 for even b, at least 4 frames apart.
        std::vector<std::size_t> candidates;
        for (std::size_t b = 2; b + 4 <= cfg.frames; b += 2) {
            candidates.push_back(b);
        }
        std::shuffle(candidates.begin(), candidates.end(), rng);
        const std::size_t want = 1 + uniform(3);
        std::vector<std::size_t> jumps;
        for (std::size_t b : candidates) {
            if (jumps.size() == want) {
                break;
            }
            if (std::all_of(jumps.begin(), jumps.end(), [b](std::size_t o) { return (b > o ? b - o : o - b) >= 4; })) {
                jumps.push_back(b);
            }
        }
        std::sort(jumps.begin(), jumps.end());

        const auto bg = genre_colour(clip.genre);
        const std::array<std::uint8_t, 3> fg{static_cast<std::uint8_t>(255 - bg[0]), static_cast<std::uint8_t>(255 - bg[1]),
                                             static_cast<std::uint8_t>(255 - bg[2])};
        const std::size_t span = cfg.size - cfg.square + 1;
        std::size_t px = uniform(span), py = uniform(span);
        clip.video = motion::make_frames(cfg.frames, cfg.size, cfg.size, 3, cfg.fps);
        std::size_t next_jump = 0;
        for (std::size_t f = 0; f < cfg.frames; ++f) {
            if (next_jump < jumps.size() && f == jumps[next_jump] + 1) {
                std::size_t nx, ny;
                do {
                    nx = uniform(span);
                    ny = uniform(span);
                } while ((nx > px ? nx - px : px - nx) + (ny > py ? ny - py : py - ny) < cfg.square);
                px = nx;
                py = ny;
                ++next_jump;
            }
            std::uint8_t* frame = clip.video.frame(f);
            for (std::size_t y = 0; y < cfg.size; ++y) {
                for (std::size_t x = 0; x < cfg.size; ++x) {
                    const bool in = x >= px && x < px + cfg.square && y >= py && y < py + cfg.square;
                    const auto& col = in ? fg : bg;
                    std::copy(col.begin(), col.end(), frame + (y * cfg.size + x) * 3);
                }
            }
        }
        const std::size_t t_a = motion::video_timeline_length(clip.video);
        motion::MotionConfig mc;
        mc.delta = cfg.delta;
        clip.video_beats = motion::analyze_video(clip.video, t_a, mc).beats;

        clip.music = codec::TokenGrid{t_a, cfg.books, cfg.vocab, std::vector<std::uint32_t>(t_a * cfg.books)};
        for (std::size_t k = 0; k < cfg.books; ++k) {
            const auto pattern = genre_pattern(clip.genre, k, cfg.vocab);
            const std::size_t phase = uniform(pattern.size());
            for (std::size_t t = 0; t < t_a; ++t) {
                std::uint32_t code = pattern[(t + phase) % pattern.size()];
                if (coin_noise(rng)) {
                    code = static_cast<std::uint32_t>(1 + uniform(cfg.vocab - 2));
                }
                clip.music.at(t, k) = code;
            }
        }
        auto place_beat = [&](std::size_t t) {
            clip.music.at(t, 0) = kBeatToken;
            for (std::size_t k = 1; k < cfg.books; ++k) {
                clip.music.at(t, k) = accent;
            }
        };
        std::vector<std::size_t> video_frames;
        for (std::size_t t = 0; t < t_a; ++t) {
            if (clip.video_beats.beats[t]) {
                video_frames.push_back(t);
                if (coin_beat(rng)) {
                    place_beat(t);
                }
            }
        }
        if (coin_off(rng)) {
            std::vector<std::size_t> free;
            for (std::size_t t = 0; t < t_a; ++t) {
                if (std::all_of(video_frames.begin(), video_frames.end(),
                                [&](std::size_t v) { return (t > v ? t - v : v - t) > cfg.delta; })) {
                    free.push_back(t);
                }
            }
            if (!free.empty()) {
                place_beat(free[uniform(free.size())]);
            }
        }
        clip.music_beats = beats_from_tokens(clip.music);
        world.push_back(std::move(clip));
    }
    return world;
}

}  // namespace beatforge::model
