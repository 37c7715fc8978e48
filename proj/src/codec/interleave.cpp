#include "beatforge/binary_io.hpp"
#include "beatforge/codec.hpp"
#include "beatforge/error.hpp"

namespace beatforge::codec {

std::size_t interleaved_length(std::size_t t_a, std::size_t k) { return k == 0 ? 0 : t_a + k - 1; }

InterleavedSeq delay_interleave(const TokenGrid& grid) {
    grid.validate();
    InterleavedSeq seq;
    seq.k = grid.k;
    seq.vocab = grid.vocab;
    seq.steps = interleaved_length(grid.t_a, grid.k);
    seq.tokens.assign(seq.steps * seq.k, seq.pad());
    for (std::size_t t = 0; t < grid.t_a; ++t) {
        for (std::size_t book = 0; book < grid.k; ++book) {
            seq.at(t + book, book) = grid.at(t, book);
        }
    }
    return seq;
}

TokenGrid deinterleave(const InterleavedSeq& seq) {
    if (seq.k == 0 || seq.steps < seq.k - 1 || seq.tokens.size() != seq.steps * seq.k) {
        throw FormatError("interleaved sequence has inconsistent dimensions");
    }
    TokenGrid grid;
    grid.k = seq.k;
    grid.vocab = seq.vocab;
    grid.t_a = seq.steps - (seq.k - 1);
    grid.tokens.resize(grid.t_a * grid.k);
    for (std::size_t s = 0; s < seq.steps; ++s) {
        for (std::size_t book = 0; book < seq.k; ++book) {
            const std::uint32_t v = seq.at(s, book);
            const bool content = s >= book && s - book < grid.t_a;
            if (!content && v != seq.pad()) {
                throw FormatError("step " + std::to_string(s) + ", book " + std::to_string(book) +
                                  ": code where padding is required");
            }
            if (content) {
                if (v >= seq.vocab) {
                    throw FormatError("step " + std::to_string(s) + ", book " + std::to_string(book) +
                                      ": padding or out-of-range code where a code is required");
                }
                grid.at(s - book, book) = v;
            }
        }
    }
    return grid;
}

std::string encode_grid(const TokenGrid& grid) {
    grid.validate();
    if (grid.vocab > 65536) {
        throw ContractError("vocabulary too large for 16-bit token files");
    }
    io::BinaryWriter out;
    out.magic("TGRD");
    out.u32(static_cast<std::uint32_t>(grid.t_a));
    out.u32(static_cast<std::uint32_t>(grid.k));
    out.u32(static_cast<std::uint32_t>(grid.vocab));
    for (std::uint32_t v : grid.tokens) {
        out.u16(static_cast<std::uint16_t>(v));
    }
    return out.buffer();
}

TokenGrid decode_grid(const std::string& bytes, const std::string& source) {
    io::BinaryReader r(bytes, source);
    r.expect_magic("TGRD");
    TokenGrid grid;
    grid.t_a = r.u32();
    grid.k = r.u32();
    grid.vocab = r.u32();
    if (grid.k == 0 || grid.vocab == 0) {
        r.fail("token grid header has zero codebooks or vocabulary");
    }
    if (r.remaining() != grid.t_a * grid.k * 2) {
        r.fail("expected " + std::to_string(grid.t_a * grid.k) + " codes, found " + std::to_string(r.remaining() / 2));
    }
    grid.tokens.resize(grid.t_a * grid.k);
    for (auto& v : grid.tokens) {
        const std::size_t at = r.offset();
        v = r.u16();
        if (v >= grid.vocab) {
            throw FormatError(source, static_cast<long long>(at), "code " + std::to_string(v) + " outside vocabulary");
        }
    }
    return grid;
}

void save_grid(const std::filesystem::path& path, const TokenGrid& grid) { io::write_file(path, encode_grid(grid)); }

TokenGrid load_grid(const std::filesystem::path& path) { return decode_grid(io::read_file(path), path.string()); }

std::string encode_codebooks(const Codebooks& cb) {
    io::BinaryWriter out;
    out.magic("RVQC");
    out.u32(static_cast<std::uint32_t>(cb.k()));
    out.u32(static_cast<std::uint32_t>(cb.vocab));
    out.u32(static_cast<std::uint32_t>(cb.dim));
    for (const Tensor& stage : cb.stages) {
        for (double v : stage.values()) {
            out.f64(v);
        }
    }
    return out.buffer();
}

Codebooks decode_codebooks(const std::string& bytes, const std::string& source) {
    io::BinaryReader r(bytes, source);
    r.expect_magic("RVQC");
    const std::size_t k = r.u32();
    Codebooks cb;
    cb.vocab = r.u32();
    cb.dim = r.u32();
    if (k == 0 || cb.vocab == 0 || cb.dim == 0) {
        r.fail("codebook header has a zero dimension");
    }
    if (r.remaining() != k * cb.vocab * cb.dim * 8) {
        r.fail("centroid payload size does not match the header");
    }
    for (std::size_t stage = 0; stage < k; ++stage) {
        Tensor c = Tensor::matrix(cb.vocab, cb.dim);
        for (double& v : c.values()) {
            v = r.f64();
        }
        if (!c.all_finite()) {
            r.fail("non-finite centroid");
        }
        cb.stages.push_back(std::move(c));
    }
    return cb;
}

void save_codebooks(const std::filesystem::path& path, const Codebooks& cb) {
    io::write_file(path, encode_codebooks(cb));
}

Codebooks load_codebooks(const std::filesystem::path& path) {
    return decode_codebooks(io::read_file(path), path.string());
}

}  // namespace beatforge::codec
