#pragma once

#include <ascentry/errors.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace ascentry::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<int> line_numbers; // source line of each row
};

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        auto cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                      : pos - start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t'))
            cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
            cell.remove_suffix(1);
        out.push_back(cell);
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

inline double parse_number(std::string_view cell, const std::string& where) {
    double value = 0.0;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || !std::isfinite(value))
        throw ConfigError(where + ": cannot parse number '" + std::string(cell) + "'");
    return value;
}

/// Reads a numeric CSV with one header line. Blank lines and lines starting
/// with '#' are skipped. Every data row must have the header's column count.
inline Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open '" + path + "'");
    Table table;
    std::string line;
    int line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto cells = split(line);
        if (!have_header) {
            for (auto c : cells)
                table.header.emplace_back(c);
            have_header = true;
            continue;
        }
        const std::string where = path + ":" + std::to_string(line_no);
        if (cells.size() != table.header.size())
            throw ConfigError(where + ": expected " + std::to_string(table.header.size()) +
                              " columns, found " + std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (auto c : cells)
            row.push_back(parse_number(c, where));
        table.rows.push_back(std::move(row));
        table.line_numbers.push_back(line_no);
    }
    if (!have_header)
        throw ConfigError("'" + path + "' is empty");
    return table;
}

/// Shortest round-trip representation; non-finite values as inf, -inf, nan.
inline std::string format(double v) {
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace ascentry::csv
