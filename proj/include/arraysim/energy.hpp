#pragma once

// Action counting and energy evaluation against a reference table.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "arraysim/systolic.hpp"

namespace arraysim {

struct ActionCount {
    std::string component;
    std::string action;
    std::uint64_t count = 0;
};

/// Ordered (component, action) tallies.
class ActionCounts {
public:
    void set(const std::string& component, const std::string& action, std::uint64_t count);
    void add(const std::string& component, const std::string& action, std::uint64_t count);
    std::uint64_t get(const std::string& component, const std::string& action) const;
    const std::vector<ActionCount>& entries() const { return entries_; }
    std::vector<std::string> components() const;
    void merge(const ActionCounts& other);

private:
    std::vector<ActionCount> entries_;
};

struct MacCounts {
    std::uint64_t random = 0, constant = 0, gated = 0;
};

MacCounts count_mac_actions(std::uint64_t pes, Cycle cycles, double utilization, bool gating);

struct SramCounts {
    std::uint64_t idle = 0;
    std::uint64_t read_random = 0, read_repeat = 0;
    std::uint64_t write_random = 0, write_repeat = 0;
    std::uint64_t accesses() const { return read_random + read_repeat + write_random + write_repeat; }
};

/// LRU over `bank_size_rows` open rows of `row_size_elems` consecutive addresses.
class RepeatTracker {
public:
    RepeatTracker(std::uint64_t row_size_elems, std::uint32_t bank_size_rows);
    /// True when the address falls in an open row.
    bool access(Address a);

private:
    std::uint64_t row_size_;
    std::uint32_t depth_;
    std::vector<std::uint64_t> open_;  // most recent first
};

/// Counts one operand's accesses; `is_write` selects write actions.
SramCounts count_sram_actions(const TraceSource& trace, Operand op, bool is_write, std::uint64_t row_size_elems,
                              std::uint32_t bank_size_rows, Cycle cycles, std::uint64_t arraysize);

struct SpadCounts {
    std::uint64_t ifmap_read = 0, ifmap_write = 0;
    std::uint64_t weight_read = 0, weight_write = 0;
    std::uint64_t psum_read = 0, psum_write = 0;
};

SpadCounts count_spad_actions(Dataflow df, std::uint64_t ifmap_sram_reads, std::uint64_t filter_sram_reads,
                              std::uint64_t macs);

struct EnergyOptions {
    std::uint64_t row_size_elems = 8;
    std::uint32_t bank_size_rows = 2;
    bool clock_gating = false;
};

/// Full per-run tally: MAC, three SRAMs (arraysize = operand row width) and three scratchpads.
ActionCounts count_actions(const DemandTrace& trace, const ComputeReport& compute, const EnergyOptions& opt);

class EnergyTable {
public:
    void set(const std::string& component, const std::string& action, double pj);
    void set_leakage(const std::string& component, double pj_per_cycle);
    /// Throws naming the pair when absent.
    double entry(const std::string& component, const std::string& action) const;
    double leakage(const std::string& component) const;
    bool has(const std::string& component, const std::string& action) const;
    const std::map<std::string, double>& leakages() const { return leakage_; }
    EnergyTable scaled(double k) const;

    /// Every action the counter can emit must be covered.
    void check_closed() const;

private:
    std::map<std::pair<std::string, std::string>, double> entries_;
    std::map<std::string, double> leakage_;
};

/// CSV "component,action,energy_pJ"; action "leakage" is per cycle.
EnergyTable parse_energy_table(std::string_view content);
EnergyTable load_energy_table(const std::filesystem::path& path);
/// Placeholder relative values, not physical measurements.
EnergyTable default_energy_table();

struct EnergyLine {
    std::string component, action;
    std::uint64_t count = 0;
    double energy_pj = 0;
};

struct EnergyReport {
    std::vector<EnergyLine> lines;  // dynamic lines followed by one leakage line per component
    std::map<std::string, double> component_pj;
    double dynamic_pj = 0;
    double leakage_pj = 0;
    double total_pj = 0;
    double power_mw = 0;
    double edp = 0;  // cycles * mJ
    Cycle cycles = 0;
};

EnergyReport compute_energy(const ActionCounts& counts, const EnergyTable& table, Cycle cycles, double clock_mhz);

/// Accelergy-style action-count listing with address/data delta arguments.
std::string export_action_counts(const ActionCounts& counts);

/// "Layer,Component,Action,Count,Energy_pJ"
std::string energy_report_header();
std::string energy_report_lines(const std::string& layer, const EnergyReport& r);

}  // namespace arraysim
