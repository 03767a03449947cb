#pragma once

// Run configuration, workload topology parsing and conv lowering.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "arraysim/common.hpp"

namespace arraysim {

enum class PartitionScheme { Spatial, SpatioTemporal1, SpatioTemporal2 };
enum class SparseRep { CSR, CSC, EllpackBlock };
enum class AddressMap { RoBaChCo, ChRoBaCo };

std::string_view to_string(PartitionScheme s);
PartitionScheme parse_partition_scheme(std::string_view text);
std::string_view to_string(SparseRep r);
SparseRep parse_sparse_rep(std::string_view text);
std::string_view to_string(AddressMap m);
AddressMap parse_address_map(std::string_view text);

struct CoreProfile {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::uint32_t simd_len = 0;
    Cycle simd_latency = 0;  // fixed epilogue per layer
    std::uint32_t nop_hops = 0;
    bool operator==(const CoreProfile&) const = default;
};

struct MulticoreConfig {
    std::uint32_t num_cores = 1;
    PartitionScheme scheme = PartitionScheme::Spatial;
    std::uint32_t pr = 1;
    std::uint32_t pc = 1;
    Cycle hop_latency = 0;
    std::vector<CoreProfile> core_profiles;  // empty: all cores use the array shape
    std::vector<double> row_weights;         // non-uniform split over grid rows
    std::vector<double> col_weights;         // non-uniform split over grid cols
    bool operator==(const MulticoreConfig&) const = default;
};

struct SparsityConfig {
    bool enabled = false;
    SparseRep rep = SparseRep::EllpackBlock;
    bool optimized_mapping = false;  // true: row-wise, false: layer-wise
    std::uint32_t block_size = 4;
    std::uint64_t seed = 0;
    bool operator==(const SparsityConfig&) const = default;
};

struct DramTimings {
    std::uint32_t tRCD = 17;
    std::uint32_t tRP = 17;
    std::uint32_t tCL = 17;
    std::uint32_t tBurst = 4;
    bool operator==(const DramTimings&) const = default;
};

struct DramConfig {
    std::uint32_t channels = 1;
    std::uint32_t banks_per_channel = 16;
    std::uint64_t row_size_bytes = 8192;
    std::uint64_t capacity_per_channel = std::uint64_t{512} << 20;  // 4 Gb
    double freq_mhz = 1200.0;  // command clock of a 2400 MT/s part
    DramTimings timings;
    AddressMap address_map = AddressMap::RoBaChCo;
    bool operator==(const DramConfig&) const = default;
};

struct QueueConfig {
    std::uint32_t read_entries = 128;
    std::uint32_t write_entries = 128;
    bool operator==(const QueueConfig&) const = default;
};

struct MemoryModelConfig {
    bool sram_filter = true;     // DRAM sees operand-SRAM misses instead of raw demand
    std::uint32_t line_bytes = 64;
    bool row_coalescing = false;
    double clock_ratio = 1.0;    // accelerator cycles per DRAM cycle
    bool operator==(const MemoryModelConfig&) const = default;
};

/// Per-operand layout template; steps are clamped to the tensor extents per layer.
struct LayoutTemplate {
    std::string inter_order = "chw";
    std::string intra_order = "whc";
    std::uint64_t c1_step = 1;
    std::uint64_t h1_step = 1;
    std::uint64_t w1_step = 0;  // 0: full line width
    bool operator==(const LayoutTemplate&) const = default;
};

struct LayoutConfig {
    std::uint32_t num_banks = 8;
    std::uint32_t bandwidth_per_bank = 16;
    std::uint32_t ports_per_bank = 1;
    LayoutTemplate ifmap;
    LayoutTemplate filter;
    LayoutTemplate ofmap;
    bool operator==(const LayoutConfig&) const = default;
};

struct EnergyConfig {
    std::string table_path;  // empty: built-in placeholder table
    std::uint64_t row_size_elems = 8;
    std::uint32_t bank_size_rows = 2;
    bool clock_gating = false;
    bool operator==(const EnergyConfig&) const = default;
};

struct SimConfig {
    std::string run_name = "run";
    std::uint32_t array_rows = 0;
    std::uint32_t array_cols = 0;
    Dataflow dataflow = Dataflow::WS;
    std::uint32_t ifmap_sram_kb = 256;
    std::uint32_t filter_sram_kb = 256;
    std::uint32_t ofmap_sram_kb = 128;
    std::uint32_t word_bytes = 1;
    Address ifmap_base = 0;
    Address filter_base = 10'000'000;
    Address ofmap_base = 20'000'000;
    double clock_mhz = 1000.0;
    MulticoreConfig multicore;
    SparsityConfig sparsity;
    DramConfig dram;
    QueueConfig queues;
    MemoryModelConfig memory;
    LayoutConfig layout;
    EnergyConfig energy;
    bool operator==(const SimConfig&) const = default;
};

/// Throws ParseError / ValidationError.
SimConfig parse_config(std::string_view text);
std::string serialize_config(const SimConfig& cfg);
void validate(const SimConfig& cfg);
SimConfig load_config(const std::filesystem::path& path);

enum class LayerKind { Conv, Gemm };
enum class TopologyKind { Conv, Gemm, Auto };

struct ConvShape {
    std::uint64_t ifmap_h = 0, ifmap_w = 0;
    std::uint64_t filt_h = 0, filt_w = 0;
    std::uint64_t channels = 0, num_filters = 0;
    std::uint64_t stride = 1;
};

struct SparsityRatio {
    std::uint32_t n = 0;
    std::uint32_t m = 0;
    bool operator==(const SparsityRatio&) const = default;
};

struct GemmOp {
    std::uint64_t m = 0;  // filters / output rows
    std::uint64_t n = 0;  // output columns (pixels, tokens)
    std::uint64_t k = 0;  // reduction
    std::string source_layer;
    std::uint64_t macs() const { return m * n * k; }
};

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::Gemm;
    ConvShape conv;
    GemmOp gemm;  // for Gemm layers; M, N, K as written in the topology
    std::optional<SparsityRatio> sparsity;
};

std::vector<LayerSpec> parse_topology(std::string_view text, TopologyKind kind = TopologyKind::Auto);
std::vector<LayerSpec> load_topology(const std::filesystem::path& path);

/// im2col lowering: M = filters, N = output pixels, K = window volume.
GemmOp lower_conv_to_gemm(const LayerSpec& layer);

/// Gemm layers pass through; conv layers are lowered.
GemmOp to_gemm(const LayerSpec& layer);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace arraysim
