#include "beatforge/binary_io.hpp"
#include "beatforge/error.hpp"
#include "beatforge/motion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace beatforge::motion {

namespace {

constexpr std::uint32_t kFseqVersion = 1;

// Next whitespace-delimited header token of a PNM file, skipping '#' comments.
std::string pnm_token(const std::string& data, std::size_t& pos, const std::string& source) {
    while (pos < data.size()) {
        if (data[pos] == '#') {
            while (pos < data.size() && data[pos] != '\n') {
                ++pos;
            }
        } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
    }
    if (start == pos) {
        throw FormatError(source, static_cast<long long>(pos), "truncated PNM header");
    }
    return data.substr(start, pos - start);
}

std::size_t pnm_number(const std::string& data, std::size_t& pos, const std::string& source) {
    const std::size_t at = pos;
    const std::string tok = pnm_token(data, pos, source);
    if (!std::all_of(tok.begin(), tok.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
        throw FormatError(source, static_cast<long long>(at), "expected a number in PNM header, got '" + tok + "'");
    }
    return std::stoul(tok);
}

struct Image {
    std::size_t h, w, c;
    std::string pixels;
};

Image decode_pnm(const std::string& data, const std::string& source) {
    std::size_t pos = 0;
    const std::string magic = pnm_token(data, pos, source);
    if (magic != "P6" && magic != "P5") {
        throw FormatError(source, 0, "not a binary PPM/PGM (magic '" + magic + "')");
    }
    Image img{};
    img.c = magic == "P6" ? 3 : 1;
    img.w = pnm_number(data, pos, source);
    img.h = pnm_number(data, pos, source);
    const std::size_t maxval = pnm_number(data, pos, source);
    if (maxval == 0 || maxval > 255) {
        throw FormatError(source, static_cast<long long>(pos), "unsupported maxval " + std::to_string(maxval));
    }
    ++pos;  // single whitespace before the raster
    const std::size_t need = img.h * img.w * img.c;
    if (img.h == 0 || img.w == 0 || pos + need > data.size()) {
        throw FormatError(source, static_cast<long long>(pos), "raster shorter than header dimensions");
    }
    img.pixels = data.substr(pos, need);
    if (maxval != 255) {
        for (char& ch : img.pixels) {
            const auto v = static_cast<unsigned char>(ch);
            ch = static_cast<char>(std::lround(v * 255.0 / static_cast<double>(maxval)));
        }
    }
    return img;
}

}  // namespace

void FrameSeq::validate() const {
    if (t < 1 || h < 1 || w < 1) {
        throw ContractError("frame sequence needs T, H, W >= 1");
    }
    if (c != 1 && c != 3) {
        throw ContractError("frame sequence needs 1 or 3 channels, got " + std::to_string(c));
    }
    if (!(fps > 0.0) || !std::isfinite(fps)) {
        throw ContractError("frame rate must be positive");
    }
    if (frames.size() != t * frame_bytes()) {
        throw ContractError("frame buffer holds " + std::to_string(frames.size()) + " bytes, expected " +
                            std::to_string(t * frame_bytes()));
    }
}

FrameSeq make_frames(std::size_t t, std::size_t h, std::size_t w, std::size_t c, double fps) {
    FrameSeq v;
    v.t = t;
    v.h = h;
    v.w = w;
    v.c = c;
    v.fps = fps;
    v.frames.assign(t * h * w * c, 0);
    v.validate();
    return v;
}

std::string encode_fseq(const FrameSeq& v) {
    v.validate();
    io::BinaryWriter out;
    out.magic("FSEQ");
    out.u32(kFseqVersion);
    out.u32(static_cast<std::uint32_t>(v.t));
    out.u32(static_cast<std::uint32_t>(v.h));
    out.u32(static_cast<std::uint32_t>(v.w));
    out.u32(static_cast<std::uint32_t>(v.c));
    out.f64(v.fps);
    out.bytes(std::string_view(reinterpret_cast<const char*>(v.frames.data()), v.frames.size()));
    return out.buffer();
}

FrameSeq decode_fseq(const std::string& bytes, const std::string& source) {
    io::BinaryReader r(bytes, source);
    r.expect_magic("FSEQ");
    const std::uint32_t version = r.u32();
    if (version != kFseqVersion) {
        r.fail("unsupported FSEQ version " + std::to_string(version));
    }
    FrameSeq v;
    v.t = r.u32();
    v.h = r.u32();
    v.w = r.u32();
    v.c = r.u32();
    v.fps = r.f64();
    if (v.t < 1 || v.h < 1 || v.w < 1 || (v.c != 1 && v.c != 3) || !(v.fps > 0.0)) {
        r.fail("invalid FSEQ header");
    }
    const std::size_t need = v.t * v.frame_bytes();
    if (r.remaining() != need) {
        r.fail("expected " + std::to_string(need) + " frame bytes, found " + std::to_string(r.remaining()));
    }
    const std::string raw = r.bytes(need);
    v.frames.assign(raw.begin(), raw.end());
    return v;
}

void save_fseq(const std::filesystem::path& path, const FrameSeq& v) { io::write_file(path, encode_fseq(v)); }

FrameSeq load_fseq(const std::filesystem::path& path) { return decode_fseq(io::read_file(path), path.string()); }

void write_ppm(const std::filesystem::path& path, const FrameSeq& v, std::size_t index) {
    std::string out = (v.c == 3 ? "P6\n" : "P5\n") + std::to_string(v.w) + " " + std::to_string(v.h) + "\n255\n";
    out.append(reinterpret_cast<const char*>(v.frame(index)), v.frame_bytes());
    io::write_file(path, out);
}

FrameSeq read_image_dir(const std::filesystem::path& dir, double fps) {
    if (!std::filesystem::is_directory(dir)) {
        throw FormatError(dir.string() + ": not a directory");
    }
    std::map<unsigned long long, std::filesystem::path> ordered;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto ext = entry.path().extension().string();
        const auto stem = entry.path().stem().string();
        if ((ext != ".ppm" && ext != ".pgm") || stem.empty() ||
            !std::all_of(stem.begin(), stem.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
            continue;
        }
        const auto key = std::stoull(stem);
        if (!ordered.emplace(key, entry.path()).second) {
            throw FormatError(entry.path().string() + ": duplicate frame number " + stem);
        }
    }
    if (ordered.empty()) {
        throw FormatError(dir.string() + ": no numerically named .ppm/.pgm frames");
    }
    FrameSeq v;
    v.fps = fps;
    for (const auto& [key, path] : ordered) {
        const Image img = decode_pnm(io::read_file(path), path.string());
        if (v.t == 0) {
            v.h = img.h;
            v.w = img.w;
            v.c = img.c;
        } else if (img.h != v.h || img.w != v.w || img.c != v.c) {
            throw FormatError(path.string() + ": frame size differs from the first frame");
        }
        v.frames.insert(v.frames.end(), img.pixels.begin(), img.pixels.end());
        ++v.t;
    }
    v.validate();
    return v;
}

std::vector<double> grayscale(const FrameSeq& v) {
    v.validate();
    const std::size_t pixels = v.h * v.w;
    std::vector<double> out(v.t * pixels);
    const std::uint8_t* src = v.frames.data();
    if (v.c == 1) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = src[i];
        }
        return out;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    }
    return out;
}

}  // namespace beatforge::motion
