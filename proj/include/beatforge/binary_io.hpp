#pragma once

// Little-endian primitive readers/writers for the project's binary formats.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace beatforge::io {

class BinaryWriter {
public:
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void f64(double v);
    void bytes(std::string_view data);
    void magic(std::string_view tag) { bytes(tag); }

    const std::string& buffer() const noexcept { return buf_; }
    void save(const std::filesystem::path& path) const;

private:
    std::string buf_;
};

// Reads from an in-memory copy of a file. Errors report the file name and byte offset.
class BinaryReader {
public:
    BinaryReader(std::string data, std::string source);
    static BinaryReader open(const std::filesystem::path& path);

    std::uint16_t u16();
    std::uint32_t u32();
    double f64();
    std::string bytes(std::size_t n);
    void expect_magic(std::string_view tag);

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    bool at_end() const noexcept { return pos_ == data_.size(); }
    [[noreturn]] void fail(const std::string& what) const;

private:
    void need(std::size_t n);

    std::string data_;
    std::string source_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

}  // namespace beatforge::io
