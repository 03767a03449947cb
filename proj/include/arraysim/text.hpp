#pragma once

// Small text and CSV helpers shared by the parsers and report writers.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace arraysim::text {

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string lower(std::string_view s);

/// Throws ParseError naming `what` and the line when the token is not a number.
std::uint64_t parse_u64(std::string_view token, std::size_t line, std::string_view what);
double parse_double(std::string_view token, std::size_t line, std::string_view what);
bool parse_bool(std::string_view token, std::size_t line, std::string_view what);

/// Ratios are written with six decimals.
std::string fmt_ratio(double v);

/// Shortest text that parses back to the same double.
std::string fmt_double(double v);

struct CsvRecord {
    std::size_t line = 0;
    std::vector<std::string> cells;  // trimmed, trailing empty cells dropped
};

/// Splits CSV text into records, skipping blank lines.
std::vector<CsvRecord> read_csv(std::string_view content);

std::string csv_line(const std::vector<std::string>& cells);

}  // namespace arraysim::text
