#pragma once

// Single-array GEMM mapping, demand-trace generation and compute simulation.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "arraysim/common.hpp"
#include "arraysim/workload.hpp"

namespace arraysim {

struct MappedDims {
    std::uint64_t sr = 0;  // spatial rows
    std::uint64_t sc = 0;  // spatial cols
    std::uint64_t t = 0;   // temporal
    Dataflow dataflow = Dataflow::WS;
    bool operator==(const MappedDims&) const = default;
};

/// IS -> (K, N, M), WS -> (K, M, N), OS -> (M, N, K).
MappedDims map_gemm(const GemmOp& op, Dataflow df);

/// Inverse of map_gemm.
GemmOp unmap_dims(const MappedDims& dims);

/// (2R + C + T - 2) * ceil(Sr/R) * ceil(Sc/C)
Cycle analytical_cycles(const MappedDims& dims, std::uint64_t rows, std::uint64_t cols);

struct AddressBases {
    Address ifmap = 0;
    Address filter = 10'000'000;
    Address ofmap = 20'000'000;
};

AddressBases address_bases(const SimConfig& cfg);

/// Compressed weight-stationary mapping. Array row i holds slot (i mod n_max)
/// of K-block (i / n_max); filter row m stores row_n[m] nonzeros per block.
struct SparseMapping {
    std::uint32_t block = 1;
    std::uint32_t n_max = 1;
    std::uint64_t k_dense = 0;
    std::vector<std::uint32_t> row_n;  // one entry per filter row (M)
    std::uint64_t compressed_rows() const;
};

/// Sub-range of a parent mapping handled by one core.
struct ShardWindow {
    std::uint64_t sr_off = 0, sc_off = 0, t_off = 0;
};

/// Anything that yields per-cycle operand address rows.
class TraceSource {
public:
    virtual ~TraceSource() = default;
    virtual Cycle length() const = 0;
    virtual std::uint32_t width(Operand op) const = 0;
    /// Writes `width(op)` addresses, kBubble for idle slots.
    virtual void fill_row(Operand op, Cycle cycle, std::span<Address> out) const = 0;
};

/// A trace held in memory; rows shorter than the width are padded with bubbles.
class ExplicitTrace : public TraceSource {
public:
    ExplicitTrace(std::array<std::vector<std::vector<Address>>, 3> rows);
    Cycle length() const override { return length_; }
    std::uint32_t width(Operand op) const override { return widths_[static_cast<int>(op)]; }
    void fill_row(Operand op, Cycle cycle, std::span<Address> out) const override;

private:
    std::array<std::vector<std::vector<Address>>, 3> rows_;
    std::array<std::uint32_t, 3> widths_{};
    Cycle length_ = 0;
};

/// Per-cycle operand addresses, generated on demand so that large layers
/// never need to be materialized.
class DemandTrace : public TraceSource {
public:
    DemandTrace(const MappedDims& dims, std::uint32_t rows, std::uint32_t cols, const AddressBases& bases,
                std::shared_ptr<const SparseMapping> sparse = nullptr);
    DemandTrace(const MappedDims& dims, const MappedDims& parent, const ShardWindow& window, std::uint32_t rows,
                std::uint32_t cols, const AddressBases& bases,
                std::shared_ptr<const SparseMapping> sparse = nullptr);

    Cycle length() const override { return fold_length_ * folds_; }
    Cycle fold_length() const { return fold_length_; }
    std::uint64_t folds() const { return folds_; }
    std::vector<Cycle> fold_boundaries() const;

    std::uint32_t rows() const { return rows_; }
    std::uint32_t cols() const { return cols_; }
    std::uint32_t width(Operand op) const override;
    const MappedDims& dims() const { return dims_; }
    const MappedDims& parent_dims() const { return parent_; }
    const AddressBases& bases() const { return bases_; }
    const SparseMapping* sparse() const { return sparse_.get(); }

    void fill_row(Operand op, Cycle cycle, std::span<Address> out) const override;

    /// Extent of each operand region in words, for address-space checks.
    std::uint64_t region_words(Operand op) const;

    /// Inverse of the storage layout: (row, col) of the operand matrix as stored.
    std::pair<std::uint64_t, std::uint64_t> storage_shape(Operand op) const;

private:
    Address ifmap_addr(std::uint64_t k_row, std::uint64_t n) const;
    Address filter_addr(std::uint64_t m, std::uint64_t k_row) const;
    Address ofmap_addr(std::uint64_t m, std::uint64_t n) const;
    bool filter_present(std::uint64_t m, std::uint64_t k_row) const;

    MappedDims dims_;
    MappedDims parent_;
    ShardWindow window_;
    std::uint32_t rows_;
    std::uint32_t cols_;
    AddressBases bases_;
    std::shared_ptr<const SparseMapping> sparse_;
    std::uint64_t row_folds_ = 0;
    std::uint64_t folds_ = 0;
    Cycle fold_length_ = 0;
    std::uint64_t m_ = 0, n_ = 0, k_ = 0;  // parent GEMM dims for addressing
};

DemandTrace generate_demand_trace(const MappedDims& dims, const SimConfig& cfg,
                                  std::shared_ptr<const SparseMapping> sparse = nullptr);

struct OperandStats {
    std::uint64_t accesses = 0;  // reads for ifmap/filter, writes for ofmap
    double avg_bw = 0;           // words per cycle
    std::uint64_t max_bw = 0;
};

struct ComputeReport {
    Cycle total_cycles = 0;
    double utilization = 0;
    std::uint64_t macs = 0;
    std::uint64_t folds = 0;
    std::uint32_t rows = 0, cols = 0;
    std::array<OperandStats, 3> ops{};
    const OperandStats& op(Operand o) const { return ops[static_cast<int>(o)]; }
};

ComputeReport simulate_compute(const DemandTrace& trace);

/// "cycle, addr_0, ..." with -1 for idle slots.
void write_trace_csv(const TraceSource& trace, Operand op, std::ostream& out);

}  // namespace arraysim
