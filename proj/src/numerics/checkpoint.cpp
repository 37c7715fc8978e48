#include "beatforge/checkpoint.hpp"

#include "beatforge/binary_io.hpp"
#include "beatforge/error.hpp"

#include <set>

namespace beatforge::nn {

std::string encode_checkpoint(const NamedTensors& tensors) {
    io::BinaryWriter w;
    w.magic("VMAP");
    w.u32(kCheckpointVersion);
    for (const auto& [name, t] : tensors) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name);
        w.u32(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) {
            w.u32(static_cast<std::uint32_t>(d));
        }
        for (double v : t.values()) {
            w.f64(v);
        }
    }
    return w.buffer();
}

NamedTensors decode_checkpoint(std::string data, const std::string& source) {
    io::BinaryReader r(std::move(data), source);
    r.expect_magic("VMAP");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        r.fail("unsupported checkpoint version " + std::to_string(version));
    }
    NamedTensors out;
    while (!r.at_end()) {
        const std::uint32_t len = r.u32();
        std::string name = r.bytes(len);
        const std::uint32_t rank = r.u32();
        if (rank > 8) {
            r.fail("implausible tensor rank " + std::to_string(rank));
        }
        Shape shape(rank);
        for (auto& d : shape) {
            d = r.u32();
        }
        const std::size_t count = shape_size(shape);
        if (count > r.remaining() / 8) {
            r.fail("tensor '" + name + "' payload truncated");
        }
        std::vector<double> values(count);
        for (double& v : values) {
            v = r.f64();
        }
        out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
    }
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params) {
    NamedTensors tensors;
    for (const auto& p : params.all()) {
        tensors.emplace_back(p.name, p.value);
    }
    io::write_file(path, encode_checkpoint(tensors));
}

void load_checkpoint(const std::filesystem::path& path, ParamStore& params) {
    const NamedTensors tensors = decode_checkpoint(io::read_file(path), path.string());
    std::set<std::string> seen;
    for (const auto& [name, t] : tensors) {
        if (!params.contains(name)) {
            throw FormatError(path.string(), 0, "checkpoint has unknown tensor '" + name + "'");
        }
        Parameter& p = params.at(name);
        if (p.value.shape() != t.shape()) {
            throw FormatError(path.string(), 0,
                              "tensor '" + name + "' has shape " + shape_string(t.shape()) + ", model expects " +
                                  shape_string(p.value.shape()));
        }
        p.value = t;
        seen.insert(name);
    }
    for (const auto& p : params.all()) {
        if (!seen.contains(p.name)) {
            throw FormatError(path.string(), 0, "checkpoint is missing tensor '" + p.name + "'");
        }
    }
}

}  // namespace beatforge::nn
