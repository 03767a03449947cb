#pragma once

// Multi-core partitioning: shard planning, shared-L2 footprint, per-core
// simulation and the partition sweep.

#include <cstdint>
#include <memory>
#include <vector>

#include "arraysim/systolic.hpp"
#include "arraysim/workload.hpp"

namespace arraysim {

Cycle analytical_partition_cycles(const MappedDims& dims, std::uint64_t R, std::uint64_t C, std::uint64_t pr,
                                  std::uint64_t pc, PartitionScheme scheme);

/// Splits `total` into `parts` contiguous extents. Without weights the first
/// total % parts extents get one extra element; with weights the shares are
/// rounded by largest remainder.
std::vector<std::uint64_t> split_extent(std::uint64_t total, std::uint32_t parts,
                                        const std::vector<double>& weights = {});

struct CoreShard {
    std::uint32_t grid_row = 0;
    std::uint32_t grid_col = 0;
    MappedDims dims;  // extent handled by this core (zero extents when idle)
    ShardWindow window;
    bool idle = false;
};

struct PartitionPlan {
    PartitionScheme scheme = PartitionScheme::Spatial;
    std::uint32_t pr = 1, pc = 1;
    MappedDims parent;
    std::vector<CoreShard> shards;    // row-major over the grid
    std::vector<double> shard_weights;  // per core, sums to 1 when present

    const CoreShard& at(std::uint32_t r, std::uint32_t c) const { return shards[r * pc + c]; }
};

PartitionPlan partition_workload(const MappedDims& dims, PartitionScheme scheme, std::uint32_t pr, std::uint32_t pc,
                                 const std::vector<double>& row_weights = {},
                                 const std::vector<double>& col_weights = {});

PartitionPlan partition_workload(const MappedDims& dims, const SimConfig& cfg);

struct L2Footprint {
    std::uint64_t input_l2_words = 0;
    std::uint64_t weight_l2_words = 0;
    std::uint64_t l1_input_words = 0;   // sum of per-core private copies
    std::uint64_t l1_weight_words = 0;
    std::uint64_t duplication_avoided_words = 0;
    std::uint64_t l2_bytes = 0;
    std::uint64_t l1_words() const { return l1_input_words + l1_weight_words; }
    std::uint64_t l2_words() const { return input_l2_words + weight_l2_words; }
};

L2Footprint l2_footprint(const PartitionPlan& plan, std::uint32_t word_bytes = 1);

struct CoreResult {
    CoreProfile profile;
    ComputeReport report;
    Cycle latency = 0;  // compute + epilogue + hop delay
};

struct MulticoreResult {
    std::vector<CoreResult> cores;
    Cycle aggregate_cycles = 0;
    std::size_t critical_core = 0;
};

CoreProfile core_profile(const SimConfig& cfg, std::size_t core);

/// Trace for one core's shard; the shard must not be idle.
DemandTrace shard_trace(const PartitionPlan& plan, std::size_t core, const CoreProfile& profile,
                        const AddressBases& bases, std::shared_ptr<const SparseMapping> sparse = nullptr);

MulticoreResult simulate_multicore(const PartitionPlan& plan, const SimConfig& cfg,
                                   std::shared_ptr<const SparseMapping> sparse = nullptr);

struct SweepRow {
    PartitionScheme scheme;
    std::uint32_t pr, pc;
    Cycle cycles;
    L2Footprint footprint;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::size_t compute_optimal = 0;
    std::size_t footprint_optimal = 0;
};

SweepResult sweep_partitions(const MappedDims& dims, std::uint64_t R, std::uint64_t C, std::uint32_t num_cores);

/// "scheme,Pr,Pc,cycles,l2_input_words,l2_weight_words,l1_words,pick"
std::string sweep_csv(const SweepResult& sweep);

}  // namespace arraysim
