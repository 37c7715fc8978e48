#include <doctest.h>

#include "beatforge/align.hpp"
#include "beatforge/error.hpp"
#include "alignment.hpp"

#include <random>

using namespace beatforge;
using namespace beatforge::align;

using oracle::brute_force_pr;
using oracle::brute_force_weights;
using oracle::random_beats;

TEST_CASE("overlap weights on the worked example") {
    const AlignConfig cfg{1, 0.05};
    const auto w = overlap_weights(VideoBeats{{0, 1, 0, 0}}, BeatTrack{{1, 0, 0, 0}}, cfg);
    CHECK(w.weights == std::vector<double>{0.05, 1.0, 0.05, 0.05});
    const auto none = overlap_weights(VideoBeats{{0, 0, 0, 0}}, BeatTrack{{1, 1, 1, 1}}, cfg);
    CHECK(none.weights == std::vector<double>(4, 0.05));
    const auto uniform = overlap_weights(VideoBeats{{0, 1, 0, 1}}, BeatTrack{{0, 0, 0, 1}}, AlignConfig{1, 1.0});
    CHECK(uniform.weights == std::vector<double>(4, 1.0));
}

TEST_CASE("overlap weights reject bad input") {
    CHECK_THROWS_AS(overlap_weights(VideoBeats{{0, 1}}, BeatTrack{{0, 1, 0}}, {}), ContractError);
    CHECK_THROWS_AS(overlap_weights(VideoBeats{{0, 1}}, BeatTrack{{0, 1}}, AlignConfig{0, 0.5}), ConfigError);
    CHECK_THROWS_AS(overlap_weights(VideoBeats{{0, 1}}, BeatTrack{{0, 1}}, AlignConfig{1, 0.0}), ConfigError);
    CHECK_THROWS_AS(overlap_weights(VideoBeats{{0, 1}}, BeatTrack{{0, 1}}, AlignConfig{1, 1.5}), ConfigError);
}

TEST_CASE("overlap weights match a brute-force evaluation") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> len(1, 60);
    std::uniform_int_distribution<int> dl(1, 8);
    for (int trial = 0; trial < 10000; ++trial) {
        const auto n = static_cast<std::size_t>(len(rng));
        const int delta = dl(rng);
        const double alpha = trial % 3 == 0 ? 1.0 : 0.05;
        VideoBeats pv{random_beats(rng, n, 0.2)};
        BeatTrack pa{random_beats(rng, n, 0.15)};
        const auto w = overlap_weights(pv, pa, AlignConfig{static_cast<std::size_t>(delta), alpha});
        REQUIRE(w.weights == brute_force_weights(pv.beats, pa.beats, delta, alpha));

        std::size_t ones = 0;
        for (std::size_t i = 0; i < n; ++i) {
            CHECK((w.weights[i] == 1.0 || w.weights[i] == alpha));
            if (w.weights[i] == 1.0 && alpha < 1.0) {
                ++ones;
                CHECK(pv.beats[i] == 1);
            }
        }
        CHECK(ones <= pv.count());

        // Adding a music beat never lowers a weight; removing one never raises one.
        const std::size_t k = rng() % n;
        BeatTrack more = pa, fewer = pa;
        more.beats[k] = 1;
        fewer.beats[k] = 0;
        const auto wm = overlap_weights(pv, more, AlignConfig{static_cast<std::size_t>(delta), alpha});
        const auto wf = overlap_weights(pv, fewer, AlignConfig{static_cast<std::size_t>(delta), alpha});
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(wm.weights[i] >= w.weights[i]);
            CHECK(wf.weights[i] <= w.weights[i]);
        }
    }
}

TEST_CASE("beat alignment score") {
    const std::vector<std::uint8_t> beats{0, 1, 0, 0, 1, 0, 0, 0, 1, 0};
    const auto same = mv_align_score(BeatTrack{beats}, VideoBeats{beats}, 2);
    CHECK(same.precision == 1.0);
    CHECK(same.recall == 1.0);
    CHECK(same.f1 == 1.0);

    const auto far = mv_align_score(BeatTrack{{1, 0, 0, 0, 0, 0, 0, 0, 0, 0}},
                                    VideoBeats{{0, 0, 0, 0, 0, 0, 0, 0, 0, 1}}, 3);
    CHECK(far.f1 == 0.0);
    CHECK_FALSE(far.no_music_beats);

    const auto empty = mv_align_score(BeatTrack{std::vector<std::uint8_t>(10, 0)}, VideoBeats{beats}, 3);
    CHECK(empty.no_music_beats);
    CHECK_FALSE(empty.no_video_beats);
    CHECK(empty.precision == 0.0);
    CHECK(empty.f1 == 0.0);
    CHECK_THROWS_AS(mv_align_score(BeatTrack{{0, 1}}, VideoBeats{{1}}, 1), ContractError);

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        const int delta = 1 + trial % 6;
        const auto music = random_beats(rng, 200, 0.05);
        const auto video = random_beats(rng, 200, 0.04);
        const auto s = mv_align_score(BeatTrack{music}, VideoBeats{video}, static_cast<std::size_t>(delta));
        const auto [p, r] = brute_force_pr(music, video, delta);
        CHECK(s.precision == doctest::Approx(p).epsilon(1e-15));
        CHECK(s.recall == doctest::Approx(r).epsilon(1e-15));
        const double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
        CHECK(s.f1 == doctest::Approx(f1).epsilon(1e-15));
    }
}

TEST_CASE("combined scores sum counts across clips") {
    AlignScore a;
    a.video_beats = 4;
    a.matched_video = 2;
    a.music_beats = 2;
    a.matched_music = 2;
    AlignScore b;
    b.video_beats = 6;
    b.matched_video = 6;
    b.music_beats = 8;
    b.matched_music = 4;
    const auto c = combine_scores({a, b});
    CHECK(c.recall == doctest::Approx(0.8));
    CHECK(c.precision == doctest::Approx(0.6));
}
