#pragma once

// On-chip multi-bank SRAM layout: element placement and per-cycle bank
// conflict slowdown.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "arraysim/systolic.hpp"
#include "arraysim/workload.hpp"

namespace arraysim {

struct LayoutSpec {
    std::uint64_t C = 1, H = 1, W = 1;
    std::uint64_t c1 = 1, h1 = 1, w1 = 1;
    std::string inter_order = "chw";  // outer to inner, for the line index
    std::string intra_order = "whc";  // outer to inner, within a line
    std::uint32_t bandwidth_per_bank = 1;
    std::uint32_t num_banks = 1;
    std::uint32_t ports_per_bank = 1;

    std::uint64_t line_width() const { return std::uint64_t{bandwidth_per_bank} * num_banks; }
};

struct Placement {
    std::uint64_t line_id = 0, col_id = 0, bank_id = 0;
    bool operator==(const Placement&) const = default;
};

void validate(const LayoutSpec& spec);

Placement locate(std::uint64_t c, std::uint64_t h, std::uint64_t w, const LayoutSpec& spec);

struct ElementCoord {
    std::uint64_t c = 0, h = 0, w = 0;
};

/// max over banks of ceil(distinct lines in bank / ports); 0 for no requests.
std::uint64_t cycle_conflicts(const std::vector<ElementCoord>& requests, const LayoutSpec& spec);

/// Builds a spec for a (C, H, W) tensor from a template; steps are clamped to
/// the extents and a zero w1 fills the rest of the line.
LayoutSpec make_layout_spec(const LayoutTemplate& tmpl, const LayoutConfig& cfg, std::uint64_t C, std::uint64_t H,
                            std::uint64_t W);

struct OperandLayout {
    LayoutSpec spec;
    Address base = 0;
};

/// Per-operand specs for a demand trace: operands are (1, rows, cols) tensors
/// in their storage shape.
std::array<OperandLayout, 3> operand_layouts(const DemandTrace& trace, const LayoutConfig& cfg);

struct LayoutReport {
    Cycle total_cycles = 0;     // sum over cycles of max(1, worst operand conflict)
    Cycle baseline_cycles = 0;  // ideal-bandwidth cycle count
    double slowdown = 0;
};

LayoutReport evaluate_layout(const TraceSource& trace, const std::array<OperandLayout, 3>& layouts,
                             Cycle baseline_cycles);
LayoutReport evaluate_layout(const DemandTrace& trace, const LayoutConfig& cfg);

/// "Layer,Dataflow,Banks,BandwidthPerBank,Slowdown"
std::string layout_report_header();
std::string layout_report_line(const std::string& layer, Dataflow df, const LayoutConfig& cfg,
                               const LayoutReport& r);

}  // namespace arraysim
