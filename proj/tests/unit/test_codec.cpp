#include <doctest.h>

#include "beatforge/codec.hpp"
#include "beatforge/error.hpp"

#include <random>

using namespace beatforge;
using namespace beatforge::codec;

namespace {

Tensor gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Tensor x = Tensor::matrix(n, d);
    for (double& v : x.values()) {
        v = g(rng);
    }
    return x;
}

TokenGrid random_grid(std::mt19937_64& rng, std::size_t t_a, std::size_t k, std::size_t vocab) {
    TokenGrid g{t_a, k, vocab, std::vector<std::uint32_t>(t_a * k)};
    for (auto& v : g.tokens) {
        v = static_cast<std::uint32_t>(rng() % vocab);
    }
    return g;
}

// Exhaustive residual quantisation: per stage, scan every centroid.
double brute_force_error(const Tensor& x, const Codebooks& cb) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::vector<double> r(x.row(i).begin(), x.row(i).end());
        for (const Tensor& c : cb.stages) {
            std::size_t best = 0;
            double best_d = 1e300;
            for (std::size_t j = 0; j < c.rows(); ++j) {
                double dist = 0.0;
                for (std::size_t q = 0; q < r.size(); ++q) {
                    dist += (r[q] - c(j, q)) * (r[q] - c(j, q));
                }
                if (dist < best_d) {
                    best_d = dist;
                    best = j;
                }
            }
            for (std::size_t q = 0; q < r.size(); ++q) {
                r[q] -= c(best, q);
            }
        }
        for (double v : r) {
            total += v * v;
        }
    }
    return total / static_cast<double>(x.rows());
}

}  // namespace

TEST_CASE("vocab distinct points are covered exactly by one stage") {
    const Tensor x = gaussian(16, 3, 1);
    const Codebooks cb = rvq_train(x, 1, 16);
    const TokenGrid g = quantize(x, cb);
    CHECK(reconstruction_error(x, g, cb, 1) == 0.0);
}

TEST_CASE("a repeated point leaves no residual after stage one") {
    Tensor x = Tensor::matrix(20, 4);
    for (std::size_t i = 0; i < 20; ++i) {
        for (std::size_t q = 0; q < 4; ++q) {
            x(i, q) = 0.5 * static_cast<double>(q) - 1.0;
        }
    }
    for (std::size_t k : {1u, 3u}) {
        const Codebooks cb = rvq_train(x, k, 4);
        CHECK(reconstruction_error(x, quantize(x, cb), cb, 1) == 0.0);
    }
}

TEST_CASE("error does not grow with the number of decoded stages") {
    const Tensor x = gaussian(400, 6, 7);
    const Codebooks cb = rvq_train(x, 4, 16, {25, 3});
    const TokenGrid g = quantize(x, cb);
    double prev = reconstruction_error(x, g, cb, 1);
    for (std::size_t s = 2; s <= 4; ++s) {
        const double e = reconstruction_error(x, g, cb, s);
        CHECK(e <= prev);
        prev = e;
    }
    CHECK(prev < reconstruction_error(x, g, cb, 1));
    CHECK(reconstruction_error(x, g, cb, 4) == doctest::Approx(brute_force_error(x, cb)).epsilon(1e-12));
}

TEST_CASE("quantisation matches an exhaustive search on unseen features") {
    const Codebooks cb = rvq_train(gaussian(300, 5, 11), 3, 12);
    const Tensor y = gaussian(100, 5, 12);
    const TokenGrid g = quantize(y, cb);
    CHECK(reconstruction_error(y, g, cb, 3) == doctest::Approx(brute_force_error(y, cb)).epsilon(1e-12));
}

TEST_CASE("a feature equal to a centroid maps to it") {
    const Codebooks cb = rvq_train(gaussian(50, 3, 2), 1, 8);
    Tensor y = Tensor::matrix(1, 3);
    std::copy_n(cb.stages[0].row(5).begin(), 3, y.row(0).begin());
    const TokenGrid g = quantize(y, cb);
    CHECK(g.at(0, 0) == 5);
    CHECK(reconstruction_error(y, g, cb, 1) == 0.0);
}

TEST_CASE("training is deterministic for a seed") {
    const Tensor x = gaussian(200, 4, 3);
    const auto a = encode_codebooks(rvq_train(x, 2, 8, {25, 9}));
    const auto b = encode_codebooks(rvq_train(x, 2, 8, {25, 9}));
    CHECK(a == b);
}

TEST_CASE("RVQ contract errors") {
    const Tensor x = gaussian(10, 3, 1);
    CHECK_THROWS_AS(rvq_train(x, 1, 11), ContractError);
    CHECK_THROWS_AS(rvq_train(x, 0, 4), ContractError);
    const Codebooks cb = rvq_train(x, 1, 4);
    CHECK_THROWS_AS(quantize(gaussian(3, 4, 1), cb), DimensionError);
    CHECK_THROWS_AS(quantize(x, Codebooks{}), ContractError);
}

TEST_CASE("delay interleaving by hand") {
    TokenGrid g{3, 2, 10, {1, 2, 3, 4, 5, 6}};
    const InterleavedSeq s = delay_interleave(g);
    const std::uint32_t P = 10;
    CHECK(s.steps == 4);
    CHECK(s.tokens == std::vector<std::uint32_t>{1, P, 3, 2, 5, 4, P, 6});
    CHECK(deinterleave(s) == g);

    TokenGrid one{5, 1, 10, {9, 8, 7, 6, 5}};
    CHECK(delay_interleave(one).tokens == one.tokens);

    CHECK(interleaved_length(500, 4) == 503);
}

TEST_CASE("interleaving round trips with K(K-1) pads") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 1 + trial % 8;
        const std::size_t t_a = 1 + rng() % 64;
        const TokenGrid g = random_grid(rng, t_a, k, 2048);
        const InterleavedSeq s = delay_interleave(g);
        CHECK(s.steps == t_a + k - 1);
        CHECK(static_cast<std::size_t>(std::count(s.tokens.begin(), s.tokens.end(), s.pad())) == k * (k - 1));
        REQUIRE(deinterleave(s) == g);
    }
}

TEST_CASE("malformed interleaved sequences are rejected") {
    TokenGrid g{3, 2, 10, {1, 2, 3, 4, 5, 6}};
    InterleavedSeq s = delay_interleave(g);
    s.at(0, 1) = 3;
    CHECK_THROWS_AS(deinterleave(s), FormatError);
    s = delay_interleave(g);
    s.at(1, 0) = s.pad();
    CHECK_THROWS_AS(deinterleave(s), FormatError);
}

TEST_CASE("token grid and codebook files") {
    std::mt19937_64 rng(4);
    const TokenGrid g = random_grid(rng, 50, 4, 2048);
    const std::string bytes = encode_grid(g);
    CHECK(bytes.size() == 16 + 50 * 4 * 2);
    CHECK(decode_grid(bytes, "mem") == g);
    CHECK_THROWS_AS(decode_grid(bytes.substr(0, bytes.size() - 2), "mem"), FormatError);
    std::string bad = bytes;
    bad[16] = '\xff';
    bad[17] = '\xff';
    CHECK_THROWS_AS(decode_grid(bad, "mem"), FormatError);

    const Codebooks cb = rvq_train(gaussian(40, 3, 5), 2, 4);
    const Codebooks back = decode_codebooks(encode_codebooks(cb), "mem");
    REQUIRE(back.k() == 2);
    CHECK(back.stages[1] == cb.stages[1]);
    CHECK_THROWS_AS(decode_codebooks("RVQD", "mem"), FormatError);
}

TEST_CASE("audio features land on the token timeline") {
    signal::Waveform w;
    w.sample_rate = 16000.0;
    w.samples.resize(16000);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        w.samples[i] = std::sin(0.05 * static_cast<double>(i)) * (i % 3200 < 800 ? 1.0 : 0.1);
    }
    const Tensor f = audio_features(w, 8);
    CHECK(f.rows() == 50);
    CHECK(f.cols() == 8);
    CHECK(f.all_finite());
}
