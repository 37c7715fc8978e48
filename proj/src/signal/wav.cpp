#include "beatforge/binary_io.hpp"
#include "beatforge/error.hpp"
#include "beatforge/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace beatforge::signal {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

double read_sample(const unsigned char* p, std::uint16_t format, std::uint16_t bits) {
    if (format == kFormatFloat) {
        if (bits == 32) {
            float f;
            std::memcpy(&f, p, 4);
            return f;
        }
        double d;
        std::memcpy(&d, p, 8);
        return d;
    }
    switch (bits) {
        case 8:
            return (static_cast<double>(p[0]) - 128.0) / 128.0;
        case 16: {
            std::int16_t v;
            std::memcpy(&v, p, 2);
            return v / 32768.0;
        }
        case 24: {
            std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
            if (v & 0x800000) {
                v -= 0x1000000;
            }
            return v / 8388608.0;
        }
        default: {
            std::int32_t v;
            std::memcpy(&v, p, 4);
            return v / 2147483648.0;
        }
    }
}

}  // namespace

Waveform decode_wav(const std::string& bytes, const std::string& source) {
    io::BinaryReader r(bytes, source);
    r.expect_magic("RIFF");
    r.u32();
    r.expect_magic("WAVE");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    while (!r.at_end()) {
        const std::size_t chunk_at = r.offset();
        const std::string id = r.bytes(4);
        const std::uint32_t size = r.u32();
        if (id == "fmt ") {
            if (size < 16) {
                throw FormatError(source, static_cast<long long>(chunk_at), "fmt chunk too small");
            }
            const std::string body = r.bytes(size);
            io::BinaryReader f(body, source);
            format = f.u16();
            channels = f.u16();
            rate = f.u32();
            f.u32();
            f.u16();
            bits = f.u16();
            if (format == kFormatExtensible) {
                if (size < 40) {
                    throw FormatError(source, static_cast<long long>(chunk_at), "extensible fmt chunk too small");
                }
                f.bytes(8);
                format = f.u16();
            }
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) {
                throw FormatError(source, static_cast<long long>(chunk_at), "data chunk before fmt chunk");
            }
            const bool pcm_ok = format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
            const bool float_ok = format == kFormatFloat && (bits == 32 || bits == 64);
            if (!pcm_ok && !float_ok) {
                throw FormatError(source, static_cast<long long>(chunk_at),
                                  "unsupported WAV encoding (format " + std::to_string(format) + ", " +
                                      std::to_string(bits) + " bits)");
            }
            if (channels == 0 || rate == 0) {
                throw FormatError(source, static_cast<long long>(chunk_at), "zero channels or sample rate");
            }
            const std::size_t available = std::min<std::size_t>(size, r.remaining());
            const std::string data = r.bytes(available);
            const std::size_t frame_bytes = static_cast<std::size_t>(bits / 8) * channels;
            const std::size_t frames = data.size() / frame_bytes;
            Waveform w;
            w.sample_rate = rate;
            w.samples.resize(frames);
            const auto* p = reinterpret_cast<const unsigned char*>(data.data());
            for (std::size_t i = 0; i < frames; ++i) {
                double acc = 0.0;
                for (std::uint16_t c = 0; c < channels; ++c) {
                    acc += read_sample(p + i * frame_bytes + c * (bits / 8), format, bits);
                }
                w.samples[i] = acc / channels;
            }
            return w;
        } else {
            r.bytes(std::min<std::size_t>(size + (size & 1u), r.remaining()));
            continue;
        }
        if (size & 1u && !r.at_end()) {
            r.bytes(1);
        }
    }
    throw FormatError(source, static_cast<long long>(r.offset()), "no data chunk");
}

Waveform read_wav(const std::filesystem::path& path) { return decode_wav(io::read_file(path), path.string()); }

std::string encode_wav(const Waveform& w, WavEncoding enc) {
    const std::uint16_t bits = enc == WavEncoding::pcm16 ? 16 : 32;
    const std::uint16_t format = enc == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat;
    const auto rate = static_cast<std::uint32_t>(std::lround(w.sample_rate));
    const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * (bits / 8));
    io::BinaryWriter out;
    out.magic("RIFF");
    out.u32(36 + data_bytes);
    out.magic("WAVE");
    out.magic("fmt ");
    out.u32(16);
    out.u16(format);
    out.u16(1);
    out.u32(rate);
    out.u32(rate * (bits / 8));
    out.u16(bits / 8);
    out.u16(bits);
    out.magic("data");
    out.u32(data_bytes);
    for (double s : w.samples) {
        if (enc == WavEncoding::pcm16) {
            const double clamped = std::clamp(s, -1.0, 1.0);
            const auto v = static_cast<std::int16_t>(std::lround(std::clamp(clamped * 32768.0, -32768.0, 32767.0)));
            out.u16(static_cast<std::uint16_t>(v));
        } else {
            const auto f = static_cast<float>(s);
            std::uint32_t u;
            std::memcpy(&u, &f, 4);
            out.u32(u);
        }
    }
    return out.buffer();
}

void write_wav(const std::filesystem::path& path, const Waveform& w, WavEncoding enc) {
    io::write_file(path, encode_wav(w, enc));
}

}  // namespace beatforge::signal
