#include "arraysim/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "arraysim/common.hpp"

namespace arraysim::text {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::uint64_t parse_u64(std::string_view token, std::size_t line, std::string_view what) {
    token = trim(token);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size())
        throw ParseError("non-numeric value '" + std::string(token) + "' for " + std::string(what), line);
    return v;
}

double parse_double(std::string_view token, std::size_t line, std::string_view what) {
    token = trim(token);
    double v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(v))
        throw ParseError("non-numeric value '" + std::string(token) + "' for " + std::string(what), line);
    return v;
}

bool parse_bool(std::string_view token, std::size_t line, std::string_view what) {
    auto t = lower(trim(token));
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ParseError("expected true/false for " + std::string(what) + ", got '" + std::string(token) + "'",
                     line);
}

std::string fmt_ratio(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::vector<CsvRecord> read_csv(std::string_view content) {
    std::vector<CsvRecord> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= content.size()) {
        auto end = content.find('\n', start);
        if (end == std::string_view::npos) end = content.size();
        auto line = content.substr(start, end - start);
        ++line_no;
        start = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) {
            if (end == content.size()) break;
            continue;
        }
        CsvRecord rec;
        rec.line = line_no;
        for (auto& cell : split(line, ',')) rec.cells.emplace_back(trim(cell));
        while (!rec.cells.empty() && rec.cells.back().empty()) rec.cells.pop_back();
        out.push_back(std::move(rec));
        if (end == content.size()) break;
    }
    return out;
}

std::string csv_line(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    out += '\n';
    return out;
}

}  // namespace arraysim::text
