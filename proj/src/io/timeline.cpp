#include "beatforge/timeline.hpp"

#include "beatforge/binary_io.hpp"
#include "beatforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace beatforge {

std::size_t BeatTrack::count() const { return static_cast<std::size_t>(std::count(beats.begin(), beats.end(), 1)); }

std::size_t VideoBeats::count() const { return static_cast<std::size_t>(std::count(beats.begin(), beats.end(), 1)); }

std::size_t timeline_length(std::size_t samples, double sample_rate, double rate) {
    if (!(sample_rate > 0.0) || !(rate > 0.0)) {
        throw ContractError("sample rate and timeline rate must be positive");
    }
    const double exact = static_cast<double>(samples) * rate / sample_rate;
    // Guard floor() against a product that lands a hair under an integer.
    const double nearest = std::round(exact);
    if (std::abs(exact - nearest) < 1e-9 * std::max(1.0, exact)) {
        return static_cast<std::size_t>(nearest);
    }
    return static_cast<std::size_t>(std::floor(exact));
}

namespace csv {

namespace {

struct Row {
    std::size_t offset;
    std::string text;
};

std::vector<Row> split_rows(const std::string& text) {
    std::vector<Row> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) {
            end = text.size();
        }
        std::string line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            rows.push_back({pos, std::move(line)});
        }
        pos = end + 1;
    }
    return rows;
}

// Returns the value column of "frame,value", checking the frame index.
std::string value_field(const Row& row, std::size_t expected_frame, const std::string& source) {
    const std::size_t comma = row.text.find(',');
    if (comma == std::string::npos) {
        throw FormatError(source, static_cast<long long>(row.offset), "expected two comma-separated columns");
    }
    const std::string frame = row.text.substr(0, comma);
    if (frame != std::to_string(expected_frame)) {
        throw FormatError(source, static_cast<long long>(row.offset),
                          "expected frame " + std::to_string(expected_frame) + ", got '" + frame + "'");
    }
    return row.text.substr(comma + 1);
}

void check_header(const std::vector<Row>& rows, const std::string& expected, const std::string& source) {
    if (rows.empty() || rows.front().text != expected) {
        throw FormatError(source, 0, "expected header '" + expected + "'");
    }
}

}  // namespace

std::string format_binary(const std::vector<std::uint8_t>& values) {
    std::string out = "frame,beat\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += std::to_string(i);
        out += values[i] ? ",1\n" : ",0\n";
    }
    return out;
}

std::vector<std::uint8_t> parse_binary(const std::string& text, const std::string& source) {
    const auto rows = split_rows(text);
    check_header(rows, "frame,beat", source);
    std::vector<std::uint8_t> values;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const std::string v = value_field(rows[i], i - 1, source);
        if (v != "0" && v != "1") {
            throw FormatError(source, static_cast<long long>(rows[i].offset), "beat value must be 0 or 1, got '" + v + "'");
        }
        values.push_back(v == "1" ? 1 : 0);
    }
    return values;
}

std::string format_real(const std::vector<double>& values, const std::string& column) {
    std::string out = "frame," + column + "\n";
    char buf[64];
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, values[i]);
        out += buf;
    }
    return out;
}

std::vector<double> parse_real(const std::string& text, const std::string& column, const std::string& source) {
    const auto rows = split_rows(text);
    check_header(rows, "frame," + column, source);
    std::vector<double> values;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const std::string v = value_field(rows[i], i - 1, source);
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != v.size() || v.empty() || !std::isfinite(x)) {
            throw FormatError(source, static_cast<long long>(rows[i].offset), "not a finite number: '" + v + "'");
        }
        values.push_back(x);
    }
    return values;
}

void write_beats(const std::filesystem::path& path, const std::vector<std::uint8_t>& values) {
    io::write_file(path, format_binary(values));
}

std::vector<std::uint8_t> read_beats(const std::filesystem::path& path) {
    return parse_binary(io::read_file(path), path.string());
}

}  // namespace csv

}  // namespace beatforge
