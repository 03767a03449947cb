#include "arraysim/common.hpp"

#include <algorithm>
#include <cctype>

namespace arraysim {

std::string_view to_string(Dataflow df) {
    switch (df) {
        case Dataflow::IS: return "is";
        case Dataflow::WS: return "ws";
        case Dataflow::OS: return "os";
    }
    return "?";
}

Dataflow parse_dataflow(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "is" || lower == "input_stationary") return Dataflow::IS;
    if (lower == "ws" || lower == "weight_stationary") return Dataflow::WS;
    if (lower == "os" || lower == "output_stationary") return Dataflow::OS;
    throw ParseError("unknown dataflow '" + std::string(text) + "'");
}

std::string_view to_string(Operand op) {
    switch (op) {
        case Operand::Ifmap: return "ifmap";
        case Operand::Filter: return "filter";
        case Operand::Ofmap: return "ofmap";
    }
    return "?";
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t index) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = global_seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace arraysim
