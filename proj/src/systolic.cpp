#include "arraysim/systolic.hpp"

#include <algorithm>
#include <ostream>
#include <string>

namespace arraysim {

MappedDims map_gemm(const GemmOp& op, Dataflow df) {
    switch (df) {
        case Dataflow::IS: return {op.k, op.n, op.m, df};
        case Dataflow::WS: return {op.k, op.m, op.n, df};
        case Dataflow::OS: return {op.m, op.n, op.k, df};
    }
    return {};
}

GemmOp unmap_dims(const MappedDims& d) {
    switch (d.dataflow) {
        case Dataflow::IS: return {d.t, d.sc, d.sr, {}};
        case Dataflow::WS: return {d.sc, d.t, d.sr, {}};
        case Dataflow::OS: return {d.sr, d.sc, d.t, {}};
    }
    return {};
}

Cycle analytical_cycles(const MappedDims& d, std::uint64_t R, std::uint64_t C) {
    return (2 * R + C + d.t - 2) * ceil_div(d.sr, R) * ceil_div(d.sc, C);
}

AddressBases address_bases(const SimConfig& cfg) { return {cfg.ifmap_base, cfg.filter_base, cfg.ofmap_base}; }

ExplicitTrace::ExplicitTrace(std::array<std::vector<std::vector<Address>>, 3> rows) : rows_(std::move(rows)) {
    for (int o = 0; o < 3; ++o) {
        length_ = std::max<Cycle>(length_, rows_[o].size());
        for (auto& r : rows_[o]) widths_[o] = std::max<std::uint32_t>(widths_[o], static_cast<std::uint32_t>(r.size()));
    }
}

void ExplicitTrace::fill_row(Operand op, Cycle cycle, std::span<Address> out) const {
    const auto& rows = rows_[static_cast<int>(op)];
    const std::uint32_t w = widths_[static_cast<int>(op)];
    std::fill(out.begin(), out.begin() + w, kBubble);
    if (cycle < rows.size()) std::copy(rows[cycle].begin(), rows[cycle].end(), out.begin());
}

std::uint64_t SparseMapping::compressed_rows() const {
    std::uint64_t full = k_dense / block;
    std::uint64_t tail = k_dense % block;
    return full * std::min<std::uint64_t>(n_max, block) + std::min<std::uint64_t>(n_max, tail);
}

DemandTrace::DemandTrace(const MappedDims& dims, std::uint32_t rows, std::uint32_t cols, const AddressBases& bases,
                         std::shared_ptr<const SparseMapping> sparse)
    : DemandTrace(dims, dims, ShardWindow{}, rows, cols, bases, std::move(sparse)) {}

DemandTrace::DemandTrace(const MappedDims& dims, const MappedDims& parent, const ShardWindow& window,
                         std::uint32_t rows, std::uint32_t cols, const AddressBases& bases,
                         std::shared_ptr<const SparseMapping> sparse)
    : dims_(dims), parent_(parent), window_(window), rows_(rows), cols_(cols), bases_(bases),
      sparse_(std::move(sparse)) {
    if (rows_ < 1 || cols_ < 1) throw ConfigError("array dimensions must be >= 1");
    if (dims.sr < 1 || dims.sc < 1 || dims.t < 1) throw ValidationError("mapped dimensions must be >= 1");
    if (dims.dataflow != parent.dataflow) throw ValidationError("shard and parent dataflow differ");
    if (window.sr_off + dims.sr > parent.sr || window.sc_off + dims.sc > parent.sc ||
        window.t_off + dims.t > parent.t)
        throw ValidationError("shard window exceeds parent dimensions");
    if (sparse_) {
        if (parent.dataflow != Dataflow::WS) throw ConfigError("sparse mapping requires the ws dataflow");
        if (sparse_->compressed_rows() != parent.sr) throw ValidationError("sparse mapping does not match Sr");
        if (sparse_->row_n.size() != parent.sc) throw ValidationError("sparse mapping needs one N per filter row");
    }
    auto g = unmap_dims(parent);
    m_ = g.m;
    n_ = g.n;
    k_ = sparse_ ? sparse_->k_dense : g.k;

    row_folds_ = ceil_div(dims.sr, rows_);
    folds_ = row_folds_ * ceil_div(dims.sc, cols_);
    fold_length_ = 2 * std::uint64_t{rows_} + cols_ + dims.t - 2;

    // Operand regions must not overlap or run past the sentinel.
    struct Region {
        Address base;
        std::uint64_t words;
        Operand op;
    };
    std::array<Region, 3> regions{Region{bases_.ifmap, region_words(Operand::Ifmap), Operand::Ifmap},
                                  Region{bases_.filter, region_words(Operand::Filter), Operand::Filter},
                                  Region{bases_.ofmap, region_words(Operand::Ofmap), Operand::Ofmap}};
    for (auto& r : regions)
        if (r.words > kBubble - r.base)
            throw ConfigError("address-space overflow: " + std::string(to_string(r.op)) + " region");
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = a + 1; b < 3; ++b) {
            auto& x = regions[a];
            auto& y = regions[b];
            if (x.base < y.base + y.words && y.base < x.base + x.words)
                throw ConfigError("address-space overflow: " + std::string(to_string(x.op)) + " and " +
                                  std::string(to_string(y.op)) + " regions overlap");
        }
}

std::vector<Cycle> DemandTrace::fold_boundaries() const {
    std::vector<Cycle> out;
    out.reserve(folds_ ? folds_ - 1 : 0);
    for (std::uint64_t f = 1; f < folds_; ++f) out.push_back(f * fold_length_);
    return out;
}

std::uint32_t DemandTrace::width(Operand op) const {
    switch (op) {
        case Operand::Ifmap: return dims_.dataflow == Dataflow::WS ? rows_ : cols_;
        case Operand::Filter: return dims_.dataflow == Dataflow::WS ? cols_ : rows_;
        case Operand::Ofmap: return cols_;
    }
    return 0;
}

std::pair<std::uint64_t, std::uint64_t> DemandTrace::storage_shape(Operand op) const {
    switch (op) {
        case Operand::Ifmap: return {n_, k_};
        case Operand::Filter: return {m_, sparse_ ? parent_.sr : k_};
        case Operand::Ofmap: return {m_, n_};
    }
    return {0, 0};
}

std::uint64_t DemandTrace::region_words(Operand op) const {
    auto [r, c] = storage_shape(op);
    return r * c;
}

Address DemandTrace::ifmap_addr(std::uint64_t k_row, std::uint64_t n) const {
    std::uint64_t k = k_row;
    if (sparse_) k = (k_row / sparse_->n_max) * sparse_->block + k_row % sparse_->n_max;
    return bases_.ifmap + n * k_ + k;
}

Address DemandTrace::filter_addr(std::uint64_t m, std::uint64_t k_row) const {
    if (sparse_) return bases_.filter + m * parent_.sr + k_row;
    return bases_.filter + m * k_ + k_row;
}

Address DemandTrace::ofmap_addr(std::uint64_t m, std::uint64_t n) const { return bases_.ofmap + m * n_ + n; }

bool DemandTrace::filter_present(std::uint64_t m, std::uint64_t k_row) const {
    if (!sparse_) return true;
    std::uint64_t blk = k_row / sparse_->n_max;
    std::uint64_t slot = k_row % sparse_->n_max;
    std::uint64_t len = std::min<std::uint64_t>(sparse_->block, sparse_->k_dense - blk * sparse_->block);
    return slot < std::min<std::uint64_t>(sparse_->row_n[m], len);
}

void DemandTrace::fill_row(Operand op, Cycle cycle, std::span<Address> out) const {
    const std::uint32_t w = width(op);
    std::fill(out.begin(), out.begin() + w, kBubble);
    if (cycle >= length()) return;

    const std::uint64_t R = rows_, C = cols_, T = dims_.t;
    const std::uint64_t f = cycle / fold_length_;
    const std::int64_t tau = static_cast<std::int64_t>(cycle % fold_length_);
    const std::uint64_t r0 = (f % row_folds_) * R;
    const std::uint64_t c0 = (f / row_folds_) * C;
    const std::uint64_t rv = std::min(R, dims_.sr - r0);
    const std::uint64_t cv = std::min(C, dims_.sc - c0);
    const std::uint64_t a0 = window_.sr_off + r0;  // global spatial-row origin
    const std::uint64_t b0 = window_.sc_off + c0;  // global spatial-col origin
    const std::uint64_t t0 = window_.t_off;
    const auto iR = static_cast<std::int64_t>(R);
    const auto iT = static_cast<std::int64_t>(T);

    switch (dims_.dataflow) {
        case Dataflow::WS:
            // rows: k, cols: m, time: n
            if (op == Operand::Filter) {
                if (tau < iR && static_cast<std::uint64_t>(tau) < rv)
                    for (std::uint64_t j = 0; j < cv; ++j)
                        if (filter_present(b0 + j, a0 + tau)) out[j] = filter_addr(b0 + j, a0 + tau);
            } else if (op == Operand::Ifmap) {
                for (std::uint64_t i = 0; i < rv; ++i) {
                    std::int64_t n = tau - iR - static_cast<std::int64_t>(i);
                    if (n >= 0 && n < iT) out[i] = ifmap_addr(a0 + i, t0 + n);
                }
            } else {
                for (std::uint64_t j = 0; j < cv; ++j) {
                    std::int64_t n = tau - (2 * iR - 1) - static_cast<std::int64_t>(j);
                    if (n >= 0 && n < iT) out[j] = ofmap_addr(b0 + j, t0 + n);
                }
            }
            break;
        case Dataflow::IS:
            // rows: k, cols: n, time: m
            if (op == Operand::Ifmap) {
                if (tau < iR && static_cast<std::uint64_t>(tau) < rv)
                    for (std::uint64_t j = 0; j < cv; ++j) out[j] = ifmap_addr(a0 + tau, b0 + j);
            } else if (op == Operand::Filter) {
                for (std::uint64_t i = 0; i < rv; ++i) {
                    std::int64_t m = tau - iR - static_cast<std::int64_t>(i);
                    if (m >= 0 && m < iT) out[i] = filter_addr(t0 + m, a0 + i);
                }
            } else {
                for (std::uint64_t j = 0; j < cv; ++j) {
                    std::int64_t m = tau - (2 * iR - 1) - static_cast<std::int64_t>(j);
                    if (m >= 0 && m < iT) out[j] = ofmap_addr(t0 + m, b0 + j);
                }
            }
            break;
        case Dataflow::OS:
            // rows: m, cols: n, time: k
            if (op == Operand::Filter) {
                for (std::uint64_t i = 0; i < rv; ++i) {
                    std::int64_t k = tau - static_cast<std::int64_t>(i);
                    if (k >= 0 && k < iT) out[i] = filter_addr(a0 + i, t0 + k);
                }
            } else if (op == Operand::Ifmap) {
                for (std::uint64_t j = 0; j < cv; ++j) {
                    std::int64_t k = tau - static_cast<std::int64_t>(j);
                    if (k >= 0 && k < iT) out[j] = ifmap_addr(t0 + k, b0 + j);
                }
            } else {
                std::int64_t d = tau - static_cast<std::int64_t>(fold_length_ - R);
                if (d >= 0 && static_cast<std::uint64_t>(d) < rv)
                    for (std::uint64_t j = 0; j < cv; ++j) out[j] = ofmap_addr(a0 + d, b0 + j);
            }
            break;
    }
}

DemandTrace generate_demand_trace(const MappedDims& dims, const SimConfig& cfg,
                                  std::shared_ptr<const SparseMapping> sparse) {
    return DemandTrace(dims, cfg.array_rows, cfg.array_cols, address_bases(cfg), std::move(sparse));
}

ComputeReport simulate_compute(const DemandTrace& trace) {
    ComputeReport rep;
    rep.total_cycles = trace.length();
    rep.folds = trace.folds();
    rep.rows = trace.rows();
    rep.cols = trace.cols();
    const auto& d = trace.dims();
    rep.macs = d.sr * d.sc * d.t;
    rep.utilization = rep.total_cycles
                          ? static_cast<double>(rep.macs) /
                                (static_cast<double>(rep.rows) * rep.cols * static_cast<double>(rep.total_cycles))
                          : 0.0;

    std::vector<Address> buf(std::max(trace.rows(), trace.cols()));
    for (Operand op : kOperands) {
        auto& s = rep.ops[static_cast<int>(op)];
        const std::uint32_t w = trace.width(op);
        std::span<Address> row(buf.data(), w);
        for (Cycle c = 0; c < rep.total_cycles; ++c) {
            trace.fill_row(op, c, row);
            // Rows never repeat an address, so touches equal non-idle slots.
            std::uint64_t n = 0;
            for (Address a : row) n += a != kBubble;
            s.accesses += n;
            s.max_bw = std::max(s.max_bw, n);
        }
        s.avg_bw = rep.total_cycles ? static_cast<double>(s.accesses) / static_cast<double>(rep.total_cycles) : 0.0;
    }
    return rep;
}

void write_trace_csv(const TraceSource& trace, Operand op, std::ostream& out) {
    const std::uint32_t w = trace.width(op);
    std::vector<Address> row(w);
    std::string line;
    for (Cycle c = 0; c < trace.length(); ++c) {
        trace.fill_row(op, c, row);
        line = std::to_string(c);
        for (Address a : row) {
            line += ", ";
            line += a == kBubble ? std::string("-1") : std::to_string(a);
        }
        line += '\n';
        out << line;
    }
}

}  // namespace arraysim
