#pragma once

// Per-layer orchestration and report emission.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arraysim/energy.hpp"
#include "arraysim/layout.hpp"
#include "arraysim/memory.hpp"
#include "arraysim/multicore.hpp"
#include "arraysim/sparsity.hpp"
#include "arraysim/systolic.hpp"
#include "arraysim/workload.hpp"

namespace arraysim {

inline constexpr const char* kToolVersion = "1.0.0";

/// Compute always runs; the others are opt-in.
struct StageSet {
    bool compute = true;
    bool memory = false;
    bool layout = false;
    bool energy = false;
    bool sparsity = false;
};

/// Comma list of compute,memory,layout,energy,sparsity or "all".
StageSet parse_stages(std::string_view list);
std::string to_string(const StageSet& s);

struct LayerResult {
    std::size_t index = 0;
    std::string name;
    GemmOp gemm;
    MappedDims dims;  // after sparse compression
    std::uint32_t cores = 1;
    ComputeReport compute;

    std::optional<SparseReportRow> sparse;
    std::optional<StallReport> stalls;
    std::optional<DramStats> dram;
    std::uint64_t requests = 0;
    std::optional<LayoutReport> layout;
    std::optional<ActionCounts> actions;
    std::optional<EnergyReport> energy;
    std::vector<std::filesystem::path> dumped;  // trace files written for this layer
};

struct LayerOptions {
    StageSet stages;
    const EnergyTable* energy_table = nullptr;        // required when energy is on
    std::optional<std::filesystem::path> trace_dir;   // dump traces here
    std::optional<std::filesystem::path> latency_dir; // imported per-request DRAM latencies
};

LayerResult simulate_layer(const LayerSpec& layer, std::size_t index, const SimConfig& cfg, const LayerOptions& opt);

/// Runs layers on `jobs` workers; results come back in layer order. The
/// lowest-index failure is rethrown after all workers stop.
std::vector<LayerResult> simulate_layers(const std::vector<LayerSpec>& layers, const SimConfig& cfg,
                                         const LayerOptions& opt, unsigned jobs);

struct ReportFile {
    std::string name;
    std::string content;
};

/// Report contents for the enabled stages, in a fixed order.
std::vector<ReportFile> build_reports(const std::vector<LayerResult>& results, const SimConfig& cfg,
                                      const StageSet& stages);

struct RunOptions {
    std::filesystem::path config;
    std::filesystem::path topology;
    std::filesystem::path out;
    StageSet stages;
    bool dump_traces = false;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    std::optional<std::filesystem::path> latency_dir;
};

struct RunSummary {
    std::vector<std::filesystem::path> files;
    std::size_t layers = 0;
};

/// Full run: load, simulate, write reports and the manifest. On failure every
/// file this run created is removed before the exception propagates.
RunSummary run_pipeline(const RunOptions& opt);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// File-name-safe form of a layer name.
std::string sanitize_name(std::string_view name);

}  // namespace arraysim
