#include "arraysim/sparsity.hpp"

#include <algorithm>
#include <random>

#include "arraysim/text.hpp"

namespace arraysim {

std::uint32_t SparsityPattern::max_n() const {
    std::uint32_t n = 0;
    for (auto v : per_row_n) n = std::max(n, v);
    return n;
}

std::uint64_t SparsityPattern::nnz() const {
    const std::uint64_t full = k / block_m, tail = k % block_m;
    std::uint64_t total = 0;
    for (auto n : per_row_n) total += full * n + std::min<std::uint64_t>(n, tail);
    return total;
}

SparseMask to_mask(const SparsityPattern& p) {
    SparseMask m;
    m.rows = p.per_row_n.size();
    m.cols = p.k;
    m.bits.assign(m.rows * m.cols, 0);
    for (std::uint64_t r = 0; r < m.rows; ++r)
        for (std::uint64_t c = 0; c < m.cols; ++c)
            m.bits[r * m.cols + c] = (c % p.block_m) < p.per_row_n[r];
    return m;
}

std::optional<SparsityPattern> materialize_pattern(const GemmOp& op, const std::optional<SparsityRatio>& ratio,
                                                   const SparsityConfig& cfg, std::uint64_t layer_index) {
    if (!cfg.enabled) return std::nullopt;
    SparsityPattern p;
    p.k = op.k;
    if (cfg.optimized_mapping) {
        p.mode = SparsityMode::RowWise;
        p.block_m = cfg.block_size;
        if (p.block_m < 2) throw ValidationError("row-wise sparsity needs BlockSize >= 2 (N <= M/2)");
        p.seed = derive_seed(cfg.seed, layer_index);
        std::mt19937_64 rng(p.seed);
        std::uniform_int_distribution<std::uint32_t> dist(1, p.block_m / 2);
        p.per_row_n.resize(op.m);
        for (auto& n : p.per_row_n) n = dist(rng);
        return p;
    }
    if (!ratio) return std::nullopt;
    if (ratio->n < 1 || ratio->m < 1 || ratio->n > ratio->m)
        throw ValidationError("sparsity ratio " + std::to_string(ratio->n) + ":" + std::to_string(ratio->m) +
                              " has N > M");
    p.mode = SparsityMode::LayerWise;
    p.block_m = ratio->m;
    p.per_row_n.assign(op.m, ratio->n);
    return p;
}

SparseStorageReport storage_report(const SparseMask& mask, std::uint32_t block_m, SparseRep rep,
                                   std::uint32_t word_bits) {
    if (block_m < 1) throw ValidationError("block size must be >= 1");
    if (word_bits < 1) throw ValidationError("word size must be >= 1 bit");
    SparseStorageReport s;
    s.rep = rep;
    s.original_words = mask.rows * mask.cols;
    for (auto b : mask.bits) s.nnz_words += b != 0;
    switch (rep) {
        case SparseRep::EllpackBlock:
            s.metadata_bits = s.nnz_words * ceil_log2(block_m);
            break;
        case SparseRep::CSR:
            s.metadata_bits = s.nnz_words * ceil_log2(mask.cols) + (mask.rows + 1) * ceil_log2(s.nnz_words + 1);
            break;
        case SparseRep::CSC:
            s.metadata_bits = s.nnz_words * ceil_log2(mask.rows) + (mask.cols + 1) * ceil_log2(s.nnz_words + 1);
            break;
    }
    s.new_storage_bits = s.nnz_words * word_bits + s.metadata_bits;
    s.original_bytes = ceil_div(s.original_words * word_bits, 8);
    s.value_bytes = ceil_div(s.nnz_words * word_bits, 8);
    s.metadata_bytes = ceil_div(s.metadata_bits, 8);
    return s;
}

SparseStorageReport storage_report(const SparsityPattern& p, std::uint64_t filter_rows, SparseRep rep,
                                   std::uint32_t word_bits) {
    if (p.per_row_n.size() != filter_rows) throw ValidationError("pattern does not cover every filter row");
    return storage_report(to_mask(p), p.block_m, rep, word_bits);
}

SparseStorageReport dense_storage_report(std::uint64_t filter_rows, std::uint64_t k, SparseRep rep,
                                         std::uint32_t word_bits) {
    SparseStorageReport s;
    s.rep = rep;
    s.original_words = s.nnz_words = filter_rows * k;
    s.new_storage_bits = s.original_words * word_bits;
    s.original_bytes = s.value_bytes = ceil_div(s.new_storage_bits, 8);
    return s;
}

SparseMappedDims sparse_mapped_dims(const MappedDims& dims, const SparsityPattern& p) {
    if (dims.dataflow != Dataflow::WS) throw ConfigError("sparsity requires the ws dataflow");
    if (p.per_row_n.size() != dims.sc || p.k != dims.sr)
        throw ValidationError("sparsity pattern does not match the filter shape");
    auto m = std::make_shared<SparseMapping>();
    m->block = p.block_m;
    m->n_max = std::max<std::uint32_t>(1, p.max_n());
    m->k_dense = p.k;
    m->row_n = p.per_row_n;
    SparseMappedDims out;
    out.dims = dims;
    out.dims.sr = m->compressed_rows();
    out.mapping = std::move(m);
    return out;
}

std::string sparse_report_csv(const std::vector<SparseReportRow>& rows) {
    std::string out =
        "Layer,Representation,OriginalStorageBytes,CompressedValueBytes,MetadataBytes,NewStorageBytes,Ratio,Seed\n";
    for (const auto& r : rows)
        out += text::csv_line({r.layer, std::string(to_string(r.storage.rep)), std::to_string(r.storage.original_bytes),
                               std::to_string(r.storage.value_bytes), std::to_string(r.storage.metadata_bytes),
                               std::to_string(r.storage.new_bytes()), r.ratio, std::to_string(r.seed)});
    return out;
}

}  // namespace arraysim
