#pragma once

// "VMAP" parameter checkpoints: magic, u32 version, then records of
// (u32 name length, UTF-8 name, u32 rank, rank x u32 dims, f64 payload)
// until end of file. All integers and floats little-endian.

#include "beatforge/autodiff.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace beatforge::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::string encode_checkpoint(const NamedTensors& tensors);
NamedTensors decode_checkpoint(std::string data, const std::string& source = "<memory>");

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);
// Loads values into an existing store. Every stored tensor must match a
// parameter by name and shape, and every parameter must be present.
void load_checkpoint(const std::filesystem::path& path, ParamStore& params);

}  // namespace beatforge::nn
