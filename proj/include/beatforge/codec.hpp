#pragma once

// Residual vector quantizer, token grids and the delay interleaving pattern.

#include "beatforge/signal.hpp"
#include "beatforge/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace beatforge::codec {

// t_a x K code indices, row-major.
struct TokenGrid {
    std::size_t t_a = 0;
    std::size_t k = 0;
    std::size_t vocab = 0;
    std::vector<std::uint32_t> tokens;

    std::uint32_t at(std::size_t t, std::size_t book) const { return tokens[t * k + book]; }
    std::uint32_t& at(std::size_t t, std::size_t book) { return tokens[t * k + book]; }
    void validate() const;
    bool operator==(const TokenGrid&) const = default;
};

struct Codebooks {
    std::size_t vocab = 0;
    std::size_t dim = 0;
    std::vector<Tensor> stages;  // each vocab x dim

    std::size_t k() const noexcept { return stages.size(); }
};

struct RvqConfig {
    std::size_t iterations = 25;
    std::uint64_t seed = 0;
};

// Stage-wise k-means on running residuals. Each stage starts from a
// farthest-point initialisation seeded by `seed` and ends on a centroid update.
Codebooks rvq_train(const Tensor& features, std::size_t k, std::size_t vocab, const RvqConfig& cfg = {});

// Nearest centroid per stage on the running residual. stages = 0 means all.
TokenGrid quantize(const Tensor& features, const Codebooks& cb);
Tensor dequantize(const TokenGrid& grid, const Codebooks& cb, std::size_t stages = 0);
// Mean squared reconstruction error per row when decoding with the first `stages` books.
double reconstruction_error(const Tensor& features, const TokenGrid& grid, const Codebooks& cb, std::size_t stages);

// (t_a + K - 1) x K steps; step s, book k holds frame s - k or pad (= vocab).
struct InterleavedSeq {
    std::size_t steps = 0;
    std::size_t k = 0;
    std::size_t vocab = 0;
    std::vector<std::uint32_t> tokens;

    std::uint32_t pad() const noexcept { return static_cast<std::uint32_t>(vocab); }
    std::uint32_t at(std::size_t s, std::size_t book) const { return tokens[s * k + book]; }
    std::uint32_t& at(std::size_t s, std::size_t book) { return tokens[s * k + book]; }
};

InterleavedSeq delay_interleave(const TokenGrid& grid);
TokenGrid deinterleave(const InterleavedSeq& seq);
std::size_t interleaved_length(std::size_t t_a, std::size_t k);

// "TGRD", u32 t_a K vocab, then t_a*K u16 codes.
std::string encode_grid(const TokenGrid& grid);
TokenGrid decode_grid(const std::string& bytes, const std::string& source);
void save_grid(const std::filesystem::path& path, const TokenGrid& grid);
TokenGrid load_grid(const std::filesystem::path& path);

// "RVQC", u32 K vocab dim, then K*vocab*dim f64 centroids.
std::string encode_codebooks(const Codebooks& cb);
Codebooks decode_codebooks(const std::string& bytes, const std::string& source);
void save_codebooks(const std::filesystem::path& path, const Codebooks& cb);
Codebooks load_codebooks(const std::filesystem::path& path);

// Log mel-band frames at the 50 Hz hop, one row per token frame (t_a rows;
// the final partial frames repeat the last full STFT frame).
Tensor audio_features(const signal::Waveform& w, std::size_t bands, std::size_t window = 1024);

}  // namespace beatforge::codec
