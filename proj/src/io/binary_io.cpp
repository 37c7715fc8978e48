#include "beatforge/binary_io.hpp"

#include "beatforge/error.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace beatforge::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void BinaryWriter::u16(std::uint16_t v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }
void BinaryWriter::u32(std::uint32_t v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }
void BinaryWriter::f64(double v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }
void BinaryWriter::bytes(std::string_view data) { buf_.append(data); }

void BinaryWriter::save(const std::filesystem::path& path) const { write_file(path, buf_); }

BinaryReader::BinaryReader(std::string data, std::string source) : data_(std::move(data)), source_(std::move(source)) {}

BinaryReader BinaryReader::open(const std::filesystem::path& path) { return BinaryReader(read_file(path), path.string()); }

void BinaryReader::fail(const std::string& what) const {
    throw FormatError(source_, static_cast<long long>(pos_), what);
}

void BinaryReader::need(std::size_t n) {
    if (remaining() < n) {
        fail("unexpected end of data (need " + std::to_string(n) + " bytes, have " + std::to_string(remaining()) + ")");
    }
}

std::uint16_t BinaryReader::u16() {
    need(2);
    std::uint16_t v;
    std::memcpy(&v, data_.data() + pos_, 2);
    pos_ += 2;
    return v;
}

std::uint32_t BinaryReader::u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, data_.data() + pos_, 4);
    pos_ += 4;
    return v;
}

double BinaryReader::f64() {
    need(8);
    double v;
    std::memcpy(&v, data_.data() + pos_, 8);
    pos_ += 8;
    return v;
}

std::string BinaryReader::bytes(std::size_t n) {
    need(n);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
}

void BinaryReader::expect_magic(std::string_view tag) {
    const std::size_t at = pos_;
    if (remaining() < tag.size() || std::string_view(data_).substr(pos_, tag.size()) != tag) {
        throw FormatError(source_, static_cast<long long>(at), "bad magic, expected '" + std::string(tag) + "'");
    }
    pos_ += tag.size();
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError(path.string(), 0, "cannot open file");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError(path.string(), 0, "cannot open file for writing");
    }
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) {
        throw FormatError(path.string(), 0, "write failed");
    }
}

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace beatforge::io
