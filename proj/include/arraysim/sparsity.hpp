#pragma once

// N:M weight sparsity: patterns, compressed storage accounting and the
// compressed weight-stationary mapping.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arraysim/systolic.hpp"
#include "arraysim/workload.hpp"

namespace arraysim {

enum class SparsityMode { LayerWise, RowWise };

/// Nonzeros per block for each filter row. Blocks of `block_m` run along K;
/// the nonzeros of a block occupy its first slots.
struct SparsityPattern {
    SparsityMode mode = SparsityMode::LayerWise;
    std::uint32_t block_m = 1;
    std::vector<std::uint32_t> per_row_n;
    std::uint64_t seed = 0;
    std::uint64_t k = 0;  // dense row length

    std::uint32_t max_n() const;
    std::uint64_t nnz() const;
};

/// Row-major boolean mask, rows = filter rows, cols = K.
struct SparseMask {
    std::uint64_t rows = 0, cols = 0;
    std::vector<std::uint8_t> bits;
    bool at(std::uint64_t r, std::uint64_t c) const { return bits[r * cols + c] != 0; }
};

SparseMask to_mask(const SparsityPattern& p);

/// Layer-wise patterns come from the layer's N:M; row-wise patterns draw a
/// per-row N from 1..block/2 using a seed derived from (cfg.seed, layer_index).
/// Returns nullopt when the layer stays dense.
std::optional<SparsityPattern> materialize_pattern(const GemmOp& op, const std::optional<SparsityRatio>& ratio,
                                                   const SparsityConfig& cfg, std::uint64_t layer_index);

struct SparseStorageReport {
    SparseRep rep = SparseRep::EllpackBlock;
    std::uint64_t original_words = 0;
    std::uint64_t nnz_words = 0;
    std::uint64_t metadata_bits = 0;
    std::uint64_t new_storage_bits = 0;
    std::uint64_t original_bytes = 0;
    std::uint64_t value_bytes = 0;
    std::uint64_t metadata_bytes = 0;
    std::uint64_t new_bytes() const { return value_bytes + metadata_bytes; }
};

SparseStorageReport storage_report(const SparseMask& mask, std::uint32_t block_m, SparseRep rep,
                                   std::uint32_t word_bits);
SparseStorageReport storage_report(const SparsityPattern& p, std::uint64_t filter_rows, SparseRep rep,
                                   std::uint32_t word_bits);
/// Uncompressed filter: new storage equals the original.
SparseStorageReport dense_storage_report(std::uint64_t filter_rows, std::uint64_t k, SparseRep rep,
                                         std::uint32_t word_bits);

struct SparseMappedDims {
    MappedDims dims;
    std::shared_ptr<const SparseMapping> mapping;
};

/// Sr' = sum over K-blocks of min(max N, block length). Requires ws.
SparseMappedDims sparse_mapped_dims(const MappedDims& dims, const SparsityPattern& p);

struct SparseReportRow {
    std::string layer;
    std::string ratio;  // "N:M" or "rowwise(M)"; dense layers report "M:M"
    std::uint64_t seed = 0;
    SparseStorageReport storage;
};

/// "Layer,Representation,OriginalStorageBytes,CompressedValueBytes,MetadataBytes,NewStorageBytes,Ratio,Seed"
std::string sparse_report_csv(const std::vector<SparseReportRow>& rows);

}  // namespace arraysim
