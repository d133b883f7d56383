#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace wavehurst::csv {

/// Shortest round-trip-safe text: 17 significant digits.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_double(std::string_view s, std::size_t line_no) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw FormatError("line " + std::to_string(line_no) + ": not a number: '" + std::string(s) + "'");
    return v;
}

/// A parsed table: header names plus row-major cells.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
};

inline Table read_table(std::istream& in) {
    Table t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto v = trim(line);
        if (v.empty()) continue;
        auto cells = split(v);
        if (t.header.empty()) {
            for (auto c : cells) t.header.emplace_back(c);
            continue;
        }
        if (cells.size() != t.header.size())
            throw FormatError("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(t.header.size()) + " fields, got " +
                              std::to_string(cells.size()));
        auto& row = t.rows.emplace_back();
        for (auto c : cells) row.emplace_back(c);
    }
    if (t.header.empty()) throw FormatError("empty CSV input");
    return t;
}

inline Table read_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    return read_table(in);
}

/// Reads a numeric column from a CSV with header either `t,<name>` or `<name>`.
inline std::vector<double> read_value_column(std::istream& in, std::string_view name) {
    auto t = read_table(in);
    bool ok = (t.header.size() == 1 && t.header[0] == name) ||
              (t.header.size() == 2 && t.header[0] == "t" && t.header[1] == name);
    if (!ok)
        throw FormatError("bad header: expected 't," + std::string(name) + "' or '" + std::string(name) + "'");
    std::vector<double> values;
    values.reserve(t.rows.size());
    const std::size_t col = t.header.size() - 1;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        values.push_back(parse_double(t.rows[i][col], i + 2));
    return values;
}

/// Writes `t,<name>` rows with t = i/n.
inline void write_grid_series(std::ostream& out, std::string_view name, std::span<const double> values) {
    const double n = static_cast<double>(values.size() - 1);
    out << "t," << name << '\n';
    for (std::size_t i = 0; i < values.size(); ++i)
        out << format_double(static_cast<double>(i) / n) << ',' << format_double(values[i]) << '\n';
}

}  // namespace wavehurst::csv
