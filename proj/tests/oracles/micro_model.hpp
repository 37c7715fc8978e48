#pragma once

// A tiny encoder/decoder configuration, random batches for it, and a
// plain-loop decoder forward pass used as an independent logits oracle.

#include "beatforge/model.hpp"

#include <vector>

namespace beatforge::oracle {

// Encoder 4 x 3 x 8^2 -> 2 x 1^2 x 8; decoder L=2, d=8, heads=2, K=2, vocab 5, t_a=6.
model::ModelConfig micro_config(std::uint64_t seed = 3);

struct MicroBatch {
    std::vector<motion::FrameSeq> videos;
    std::vector<model::Example> examples;
};

// Random videos, token grids and beat tracks; weights from the given alignment config.
MicroBatch micro_batch(const model::ModelConfig& cfg, std::size_t clips, std::size_t t_a,
                       const align::AlignConfig& align, std::uint64_t seed);

// Decoder logits computed with scalar loops straight from the parameter
// values: result[k] is steps x vocab for book k.
std::vector<Tensor> reference_decoder_logits(const model::Model& m, const Tensor& video,
                                             const std::vector<std::uint32_t>& prefix, std::size_t steps);

}  // namespace beatforge::oracle
