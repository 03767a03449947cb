#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace arraysim {

using Cycle = std::uint64_t;
using Address = std::uint64_t;

/// Reserved address marking an idle slot in a demand-trace row.
inline constexpr Address kBubble = std::numeric_limits<Address>::max();

// Error hierarchy. Every failure surfaced to the CLI is one of these.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

enum class Dataflow { IS, WS, OS };

std::string_view to_string(Dataflow df);
Dataflow parse_dataflow(std::string_view text);

enum class Operand { Ifmap, Filter, Ofmap };

inline constexpr Operand kOperands[] = {Operand::Ifmap, Operand::Filter, Operand::Ofmap};

std::string_view to_string(Operand op);

constexpr std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

constexpr bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

/// ceil(log2(v)) for v >= 1; 0 for v <= 1.
constexpr unsigned ceil_log2(std::uint64_t v) {
    unsigned bits = 0;
    while ((std::uint64_t{1} << bits) < v) ++bits;
    return bits;
}

/// Mixes a global seed with an index into an independent per-item seed.
std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t index);

}  // namespace arraysim
