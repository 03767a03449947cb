#include "arraysim/multicore.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include "arraysim/text.hpp"

namespace arraysim {

Cycle analytical_partition_cycles(const MappedDims& d, std::uint64_t R, std::uint64_t C, std::uint64_t pr,
                                  std::uint64_t pc, PartitionScheme scheme) {
    switch (scheme) {
        case PartitionScheme::Spatial:
            return (2 * R + C + d.t - 2) * ceil_div(d.sr, pr * R) * ceil_div(d.sc, pc * C);
        case PartitionScheme::SpatioTemporal1:
            return (2 * R + C + ceil_div(d.t, pc) - 2) * ceil_div(d.sr, pr * R) * ceil_div(d.sc, C);
        case PartitionScheme::SpatioTemporal2:
            return (2 * R + C + ceil_div(d.t, pr) - 2) * ceil_div(d.sr, R) * ceil_div(d.sc, pc * C);
    }
    return 0;
}

std::vector<std::uint64_t> split_extent(std::uint64_t total, std::uint32_t parts, const std::vector<double>& weights) {
    if (parts < 1) throw ValidationError("cannot split into zero parts");
    std::vector<std::uint64_t> out(parts, 0);
    if (weights.empty()) {
        for (std::uint32_t i = 0; i < parts; ++i) out[i] = total / parts + (i < total % parts ? 1 : 0);
        return out;
    }
    if (weights.size() != parts) throw ValidationError("weight count does not match the partition count");
    double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(sum > 0)) throw ValidationError("partition weights must not all be zero");
    std::vector<double> frac(parts);
    std::uint64_t assigned = 0;
    for (std::uint32_t i = 0; i < parts; ++i) {
        double quota = static_cast<double>(total) * weights[i] / sum;
        out[i] = static_cast<std::uint64_t>(quota);
        frac[i] = quota - static_cast<double>(out[i]);
        assigned += out[i];
    }
    std::vector<std::uint32_t> order(parts);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return frac[a] > frac[b]; });
    for (std::uint64_t i = 0; assigned < total; ++i, ++assigned) ++out[order[i % parts]];
    return out;
}

namespace {

std::vector<std::uint64_t> offsets_of(const std::vector<std::uint64_t>& ext) {
    std::vector<std::uint64_t> off(ext.size(), 0);
    for (std::size_t i = 1; i < ext.size(); ++i) off[i] = off[i - 1] + ext[i - 1];
    return off;
}

struct Span {
    std::uint64_t lo, len;
    auto operator<=>(const Span&) const = default;
};

// (m, n, k) ranges covered by a shard.
struct GemmRanges {
    Span m, n, k;
};

GemmRanges shard_ranges(const CoreShard& s) {
    Span a{s.window.sr_off, s.dims.sr}, b{s.window.sc_off, s.dims.sc}, t{s.window.t_off, s.dims.t};
    switch (s.dims.dataflow) {
        case Dataflow::IS: return {t, b, a};
        case Dataflow::WS: return {b, t, a};
        case Dataflow::OS: return {a, b, t};
    }
    return {a, b, t};
}

}  // namespace

PartitionPlan partition_workload(const MappedDims& dims, PartitionScheme scheme, std::uint32_t pr, std::uint32_t pc,
                                 const std::vector<double>& row_weights, const std::vector<double>& col_weights) {
    if (pr < 1 || pc < 1) throw ValidationError("partition grid must be at least 1x1");
    PartitionPlan plan;
    plan.scheme = scheme;
    plan.pr = pr;
    plan.pc = pc;
    plan.parent = dims;

    // The grid-row split and grid-col split act on different mapped dimensions per scheme.
    std::uint64_t row_total = 0, col_total = 0;
    switch (scheme) {
        case PartitionScheme::Spatial: row_total = dims.sr; col_total = dims.sc; break;
        case PartitionScheme::SpatioTemporal1: row_total = dims.sr; col_total = dims.t; break;
        case PartitionScheme::SpatioTemporal2: row_total = dims.t; col_total = dims.sc; break;
    }
    auto rext = split_extent(row_total, pr, row_weights);
    auto cext = split_extent(col_total, pc, col_weights);
    auto roff = offsets_of(rext);
    auto coff = offsets_of(cext);

    for (std::uint32_t r = 0; r < pr; ++r)
        for (std::uint32_t c = 0; c < pc; ++c) {
            CoreShard s;
            s.grid_row = r;
            s.grid_col = c;
            s.dims = dims;
            switch (scheme) {
                case PartitionScheme::Spatial:
                    s.dims.sr = rext[r]; s.window.sr_off = roff[r];
                    s.dims.sc = cext[c]; s.window.sc_off = coff[c];
                    break;
                case PartitionScheme::SpatioTemporal1:
                    s.dims.sr = rext[r]; s.window.sr_off = roff[r];
                    s.dims.t = cext[c]; s.window.t_off = coff[c];
                    break;
                case PartitionScheme::SpatioTemporal2:
                    s.dims.t = rext[r]; s.window.t_off = roff[r];
                    s.dims.sc = cext[c]; s.window.sc_off = coff[c];
                    break;
            }
            s.idle = s.dims.sr == 0 || s.dims.sc == 0 || s.dims.t == 0;
            plan.shards.push_back(s);
        }

    if (!row_weights.empty() || !col_weights.empty()) {
        auto norm = [](const std::vector<double>& w, std::uint32_t n) {
            if (w.empty()) return std::vector<double>(n, 1.0 / n);
            double sum = std::accumulate(w.begin(), w.end(), 0.0);
            std::vector<double> out;
            for (double x : w) out.push_back(x / sum);
            return out;
        };
        auto rw = norm(row_weights, pr);
        auto cw = norm(col_weights, pc);
        for (std::uint32_t r = 0; r < pr; ++r)
            for (std::uint32_t c = 0; c < pc; ++c) plan.shard_weights.push_back(rw[r] * cw[c]);
    }
    return plan;
}

PartitionPlan partition_workload(const MappedDims& dims, const SimConfig& cfg) {
    const auto& mc = cfg.multicore;
    return partition_workload(dims, mc.scheme, mc.pr, mc.pc, mc.row_weights, mc.col_weights);
}

L2Footprint l2_footprint(const PartitionPlan& plan, std::uint32_t word_bytes) {
    L2Footprint fp;
    std::set<std::pair<Span, Span>> inputs, weights;
    for (const auto& s : plan.shards) {
        if (s.idle) continue;
        auto g = shard_ranges(s);
        const std::uint64_t in_words = g.k.len * g.n.len;
        const std::uint64_t w_words = g.m.len * g.k.len;
        fp.l1_input_words += in_words;
        fp.l1_weight_words += w_words;
        if (inputs.insert({g.k, g.n}).second) fp.input_l2_words += in_words;
        if (weights.insert({g.m, g.k}).second) fp.weight_l2_words += w_words;
    }
    fp.duplication_avoided_words = fp.l1_words() - fp.l2_words();
    fp.l2_bytes = fp.l2_words() * word_bytes;
    return fp;
}

CoreProfile core_profile(const SimConfig& cfg, std::size_t core) {
    if (!cfg.multicore.core_profiles.empty()) return cfg.multicore.core_profiles.at(core);
    CoreProfile p;
    p.rows = cfg.array_rows;
    p.cols = cfg.array_cols;
    return p;
}

DemandTrace shard_trace(const PartitionPlan& plan, std::size_t core, const CoreProfile& profile,
                        const AddressBases& bases, std::shared_ptr<const SparseMapping> sparse) {
    const auto& s = plan.shards.at(core);
    if (s.idle) throw ValidationError("core " + std::to_string(core) + " has no work");
    return DemandTrace(s.dims, plan.parent, s.window, profile.rows, profile.cols, bases, std::move(sparse));
}

MulticoreResult simulate_multicore(const PartitionPlan& plan, const SimConfig& cfg,
                                   std::shared_ptr<const SparseMapping> sparse) {
    if (plan.shards.empty()) throw ValidationError("empty partition plan");
    MulticoreResult res;
    const auto bases = address_bases(cfg);
    for (std::size_t i = 0; i < plan.shards.size(); ++i) {
        CoreResult cr;
        cr.profile = core_profile(cfg, i);
        if (!plan.shards[i].idle) {
            cr.report = simulate_compute(shard_trace(plan, i, cr.profile, bases, sparse));
            cr.latency = cr.report.total_cycles + cr.profile.simd_latency +
                         Cycle{cr.profile.nop_hops} * cfg.multicore.hop_latency;
        } else {
            cr.report.rows = cr.profile.rows;
            cr.report.cols = cr.profile.cols;
        }
        if (i == 0 || cr.latency > res.aggregate_cycles) {
            res.aggregate_cycles = cr.latency;
            res.critical_core = i;
        }
        res.cores.push_back(std::move(cr));
    }
    return res;
}

SweepResult sweep_partitions(const MappedDims& dims, std::uint64_t R, std::uint64_t C, std::uint32_t num_cores) {
    if (num_cores < 1) throw ValidationError("core count must be >= 1");
    SweepResult out;
    for (std::uint32_t pr = 1; pr <= num_cores; ++pr) {
        if (num_cores % pr) continue;
        std::uint32_t pc = num_cores / pr;
        for (auto scheme : {PartitionScheme::Spatial, PartitionScheme::SpatioTemporal1,
                            PartitionScheme::SpatioTemporal2}) {
            SweepRow row{scheme, pr, pc, analytical_partition_cycles(dims, R, C, pr, pc, scheme), {}};
            row.footprint = l2_footprint(partition_workload(dims, scheme, pr, pc));
            out.rows.push_back(row);
        }
    }
    auto key_compute = [](const SweepRow& r) {
        return std::make_tuple(r.cycles, r.footprint.l1_words(), static_cast<int>(r.scheme), r.pr);
    };
    auto key_footprint = [](const SweepRow& r) {
        return std::make_tuple(r.footprint.l1_words(), r.cycles, static_cast<int>(r.scheme), r.pr);
    };
    for (std::size_t i = 1; i < out.rows.size(); ++i) {
        if (key_compute(out.rows[i]) < key_compute(out.rows[out.compute_optimal])) out.compute_optimal = i;
        if (key_footprint(out.rows[i]) < key_footprint(out.rows[out.footprint_optimal])) out.footprint_optimal = i;
    }
    return out;
}

std::string sweep_csv(const SweepResult& sweep) {
    std::string out = "scheme,Pr,Pc,cycles,l2_input_words,l2_weight_words,l1_words,pick\n";
    for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
        const auto& r = sweep.rows[i];
        std::string pick;
        if (i == sweep.compute_optimal) pick = "compute";
        if (i == sweep.footprint_optimal) pick += pick.empty() ? "footprint" : "+footprint";
        out += text::csv_line({std::string(to_string(r.scheme)), std::to_string(r.pr), std::to_string(r.pc),
                               std::to_string(r.cycles), std::to_string(r.footprint.input_l2_words),
                               std::to_string(r.footprint.weight_l2_words), std::to_string(r.footprint.l1_words()),
                               pick});
    }
    return out;
}

}  // namespace arraysim
