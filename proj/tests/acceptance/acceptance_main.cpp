// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "arraysim/energy.hpp"
#include "arraysim/layout.hpp"
#include "arraysim/memory.hpp"
#include "arraysim/multicore.hpp"
#include "arraysim/sparsity.hpp"
#include "arraysim/systolic.hpp"
#include "arraysim/text.hpp"
#include "arraysim/workload.hpp"
#include "oracles.hpp"

using namespace arraysim;

namespace {

const std::string kData = ARRAYSIM_DATA_DIR;

struct Outcome {
    bool ok = true;
    std::ostringstream detail;

    // Records the first few failures only.
    void fail(const std::string& why) {
        if (ok || failures < 5) detail << (failures ? "; " : "") << why;
        ok = false;
        ++failures;
    }
    int failures = 0;
};

using Criterion = std::function<void(Outcome&)>;

SimConfig array_cfg(std::uint32_t R, std::uint32_t C, Dataflow df) {
    SimConfig cfg;
    cfg.array_rows = R;
    cfg.array_cols = C;
    cfg.dataflow = df;
    return cfg;
}

std::string str(const MappedDims& d) {
    std::ostringstream os;
    os << to_string(d.dataflow) << "(" << d.sr << "," << d.sc << "," << d.t << ")";
    return os.str();
}

// Last cycle with an ofmap write inside [from, to), or -1.
std::int64_t last_ofmap_write(const TraceSource& t, Cycle from, Cycle to) {
    std::vector<Address> row(t.width(Operand::Ofmap));
    for (Cycle c = to; c-- > from;) {
        t.fill_row(Operand::Ofmap, c, row);
        for (auto a : row)
            if (a != kBubble) return static_cast<std::int64_t>(c);
    }
    return -1;
}

std::uint64_t distinct(const TraceSource& t, Operand op) {
    std::set<Address> seen;
    std::vector<Address> row(t.width(op));
    for (Cycle c = 0; c < t.length(); ++c) {
        t.fill_row(op, c, row);
        for (auto a : row)
            if (a != kBubble) seen.insert(a);
    }
    return seen.size();
}

void analytical_anchor(Outcome& out) {
    std::mt19937_64 rng(2024);
    const std::uint32_t arrays[] = {4, 8, 32};
    int checked = 0;
    for (int i = 0; i < 100; ++i) {
        GemmOp op{1 + rng() % 512, 1 + rng() % 512, 1 + rng() % 512, ""};
        auto df = static_cast<Dataflow>(i % 3);
        std::uint32_t A = arrays[rng() % 3];
        auto dims = map_gemm(op, df);
        auto trace = generate_demand_trace(dims, array_cfg(A, A, df));
        auto rep = simulate_compute(trace);
        auto expect = oracle::eq1(dims.sr, dims.sc, dims.t, A, A);
        if (rep.total_cycles != expect) {
            out.fail(str(dims) + " on " + std::to_string(A) + ": " + std::to_string(rep.total_cycles) +
                     " != " + std::to_string(expect));
            continue;
        }
        // WS and IS drain the last valid column after the stream; OS drains
        // one row per cycle over the final R cycles of the fold.
        auto bounds = trace.fold_boundaries();
        bounds.insert(bounds.begin(), 0);
        bounds.push_back(trace.length());
        const std::uint64_t row_folds = oracle::up(dims.sr, A);
        for (std::size_t f = 0; f + 1 < bounds.size(); ++f) {
            const std::uint64_t rv = std::min<std::uint64_t>(A, dims.sr - (f % row_folds) * A);
            const std::uint64_t cv = std::min<std::uint64_t>(A, dims.sc - (f / row_folds) * A);
            const auto want = static_cast<std::int64_t>(
                df == Dataflow::OS ? bounds[f + 1] - A + rv - 1 : bounds[f] + 2 * A + cv + dims.t - 3);
            if (last_ofmap_write(trace, bounds[f], bounds[f + 1]) != want)
                out.fail(str(dims) + ": fold " + std::to_string(f) + " drains off schedule");
        }
        if (rep.macs != op.macs()) out.fail(str(dims) + ": MAC count");
        if (i < 30) {
            if (distinct(trace, Operand::Filter) != op.m * op.k) out.fail(str(dims) + ": filter coverage");
            if (distinct(trace, Operand::Ifmap) != op.k * op.n) out.fail(str(dims) + ": ifmap coverage");
            if (distinct(trace, Operand::Ofmap) != op.m * op.n) out.fail(str(dims) + ": ofmap coverage");
        }
        ++checked;
    }
    out.detail << (out.ok ? "" : " | ") << checked << " GEMMs match exactly";
}

void vit_latency_ratio(Outcome& out) {
    auto layers = load_topology(kData + "/topologies/vit_base.csv");
    double sum_small = 0, sum_big = 0;
    for (const auto& l : layers) {
        auto dims = map_gemm(to_gemm(l), Dataflow::WS);
        sum_small += static_cast<double>(simulate_compute(generate_demand_trace(dims, array_cfg(32, 32, Dataflow::WS)))
                                             .total_cycles);
        sum_big += static_cast<double>(
            simulate_compute(generate_demand_trace(dims, array_cfg(128, 128, Dataflow::WS))).total_cycles);
    }
    const double n = static_cast<double>(layers.size());
    const double ratio = (sum_small / n) / (sum_big / n);
    const double target = 444970.0 / 68160.0;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu layers, avg cycles/layer 32x32 %.0f, 128x128 %.0f, ratio %.4f (target %.4f +/-10%%)",
                  layers.size(), sum_small / n, sum_big / n, ratio, target);
    out.detail << buf;
    if (!(ratio >= target * 0.9 && ratio <= target * 1.1)) out.fail("ratio outside tolerance");
}

void sparsity_halving(Outcome& out) {
    std::mt19937_64 rng(7);
    SparsityConfig sc;
    sc.enabled = true;
    int checked = 0;
    for (int i = 0; i < 60; ++i) {
        std::uint32_t R = 4u << (rng() % 4);  // 4..32
        std::uint32_t C = 1 + rng() % 32;
        GemmOp op{1 + rng() % 200, 1 + rng() % 200, 2ull * R * (1 + rng() % 8), ""};
        auto dims = map_gemm(op, Dataflow::WS);
        auto cfg = array_cfg(R, C, Dataflow::WS);
        auto dense = simulate_compute(generate_demand_trace(dims, cfg));
        auto pattern = materialize_pattern(op, SparsityRatio{2, 4}, sc, 0);
        auto sm = sparse_mapped_dims(dims, *pattern);
        auto sparse = simulate_compute(generate_demand_trace(sm.dims, cfg, sm.mapping));
        const std::uint64_t expect = oracle::eq1(dims.sr / 2, dims.sc, dims.t, R, C);
        if (sm.dims.sr * 2 != dims.sr) out.fail(str(dims) + ": Sr' " + std::to_string(sm.dims.sr));
        if (sparse.folds * 2 != dense.folds) out.fail(str(dims) + ": folds not halved");
        if (sparse.total_cycles * 2 != dense.total_cycles || sparse.total_cycles != expect)
            out.fail(str(dims) + ": cycles " + std::to_string(sparse.total_cycles) + " vs dense " +
                     std::to_string(dense.total_cycles));
        ++checked;
    }
    out.detail << (out.ok ? "" : " | ") << checked << " 2:4 GEMMs halve folds and cycles exactly";
}

void sparsity_storage(Outcome& out) {
    auto layers = load_topology(kData + "/topologies/resnet18.csv");
    SparsityConfig sc;
    sc.enabled = true;
    for (std::uint32_t word_bits : {8u, 16u}) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            auto op = to_gemm(layers[i]);
            std::uint64_t prev = 0;
            for (std::uint32_t n = 1; n <= 3; ++n) {
                auto p = materialize_pattern(op, SparsityRatio{n, 4}, sc, i);
                auto bytes = storage_report(*p, op.m, SparseRep::EllpackBlock, word_bits).new_bytes();
                if (bytes <= prev) out.fail(layers[i].name + ": " + std::to_string(n) + ":4 not larger");
                prev = bytes;
            }
            auto dense = dense_storage_report(op.m, op.k, SparseRep::EllpackBlock, word_bits).new_bytes();
            if (prev >= dense) out.fail(layers[i].name + ": 3:4 not below dense");
        }
    }
    std::mt19937_64 rng(200);
    for (int i = 0; i < 200; ++i) {
        SparseMask m;
        m.rows = 1 + rng() % 64;
        m.cols = 1 + rng() % 64;
        std::bernoulli_distribution bit(static_cast<double>(rng() % 101) / 100.0);
        std::vector<std::vector<bool>> rows(m.rows, std::vector<bool>(m.cols));
        for (std::uint64_t r = 0; r < m.rows; ++r)
            for (std::uint64_t c = 0; c < m.cols; ++c) {
                rows[r][c] = bit(rng);
                m.bits.push_back(rows[r][c]);
            }
        std::uint32_t block = 1 + rng() % 16, word_bits = 1 + rng() % 32;
        auto got = storage_report(m, block, SparseRep::EllpackBlock, word_bits).new_bytes();
        auto want = oracle::ellpack_bytes(rows, block, word_bits);
        if (got != want) out.fail("mask " + std::to_string(i) + ": " + std::to_string(got) + " != " + std::to_string(want));
    }
    out.detail << (out.ok ? "" : " | ") << layers.size()
               << " layers ordered 1:4 < 2:4 < 3:4 < dense at 8/16-bit words; 200 masks match the encoder";
}

std::vector<LayerSpec> resnet_subset(const std::vector<std::string>& names) {
    auto all = load_topology(kData + "/topologies/resnet18.csv");
    std::vector<LayerSpec> out;
    for (const auto& n : names)
        for (const auto& l : all)
            if (l.name == n) out.push_back(l);
    return out;
}

void queue_monotonicity(Outcome& out) {
    auto cfg = load_config(kData + "/configs/default.cfg");
    auto layers = resnet_subset({"conv1", "layer1_0_conv1", "layer2_0_conv1", "layer2_0_downsample",
                                 "layer3_0_conv2", "layer4_0_downsample"});
    if (layers.size() != 6) out.fail("missing ResNet-18 layers");
    for (const auto& l : layers) {
        auto dims = map_gemm(to_gemm(l), cfg.dataflow);
        auto trace = generate_demand_trace(dims, cfg);
        auto mt = interleave_traces(trace, interleave_options(cfg));
        std::vector<Cycle> totals;
        for (std::uint32_t q : {32u, 128u, 512u}) {
            auto c = cfg;
            c.queues.read_entries = c.queues.write_entries = q;
            totals.push_back(run_memory_stage(mt, c).stalls.total_cycles);
        }
        out.detail << l.name << " " << totals[0] << "/" << totals[1] << "/" << totals[2] << "; ";
        if (!(totals[0] >= totals[1] && totals[1] >= totals[2])) out.fail(l.name + ": not monotone");
        std::vector<Cycle> zeros(mt.requests.size(), 0);
        auto ideal = run_memory_stage(mt, cfg, &zeros);
        if (ideal.stalls.stall_cycles != 0 || ideal.stalls.total_cycles != trace.length())
            out.fail(l.name + ": zero-latency run stalls");
    }
    out.detail << "zero-latency stalls 0";
}

void channel_scaling(Outcome& out) {
    auto cfg = load_config(kData + "/configs/default.cfg");
    auto early = resnet_subset({"conv1", "layer1_0_conv1", "layer1_0_conv2"});
    auto late = resnet_subset({"layer2_0_downsample", "layer3_0_downsample", "layer4_0_downsample"});
    auto sweep = [&](const LayerSpec& l) {
        auto trace = generate_demand_trace(map_gemm(to_gemm(l), cfg.dataflow), cfg);
        return channel_sweep(interleave_traces(trace, interleave_options(cfg)), cfg, {1, 2, 4});
    };
    char buf[200];
    for (const auto& l : early) {
        auto r = sweep(l);
        std::snprintf(buf, sizeof buf, "%s %.0f/%.0f/%.0f MB/s; ", l.name.c_str(), r[0].throughput_mbps,
                      r[1].throughput_mbps, r[2].throughput_mbps);
        out.detail << buf;
        if (!(r[1].throughput_mbps > r[0].throughput_mbps && r[2].throughput_mbps > r[1].throughput_mbps))
            out.fail(l.name + ": throughput not strictly increasing");
    }
    bool saturated = false;
    for (const auto& l : late) {
        auto r = sweep(l);
        const double gain = r[2].throughput_mbps / r[1].throughput_mbps - 1.0;
        std::snprintf(buf, sizeof buf, "%s 2->4 gain %.2f%%; ", l.name.c_str(), gain * 100);
        out.detail << buf;
        saturated = saturated || gain <= 0.05;
    }
    if (!saturated) out.fail("no 1x1 layer saturates beyond 2 channels");
}

// Sum over cycles of max(1, worst port-scheduled bank) using the brute-force scheduler.
Cycle brute_layout_cycles(const TraceSource& t, const std::array<OperandLayout, 3>& layouts) {
    Cycle total = 0;
    for (Cycle c = 0; c < t.length(); ++c) {
        std::uint64_t worst = 0;
        for (Operand op : kOperands) {
            const auto& L = layouts[static_cast<int>(op)];
            std::vector<Address> row(t.width(op));
            t.fill_row(op, c, row);
            std::vector<std::pair<std::uint64_t, std::uint64_t>> lines;
            for (auto a : row) {
                if (a == kBubble) continue;
                const std::uint64_t off = a - L.base, plane = L.spec.H * L.spec.W;
                auto p = locate(off / plane, (off % plane) / L.spec.W, off % L.spec.W, L.spec);
                lines.push_back({p.bank_id, p.line_id});
            }
            worst = std::max(worst, oracle::port_schedule(lines, L.spec.ports_per_bank));
        }
        total += std::max<std::uint64_t>(1, worst);
    }
    return total;
}

std::vector<GemmOp> distinct_shapes(const std::vector<LayerSpec>& layers) {
    std::set<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>> seen;
    std::vector<GemmOp> out;
    for (const auto& l : layers) {
        auto g = to_gemm(l);
        if (seen.insert({g.m, g.n, g.k}).second) out.push_back(g);
    }
    return out;
}

void layout_oracle(Outcome& out) {
    std::mt19937_64 rng(50);
    for (int i = 0; i < 50; ++i) {
        std::array<OperandLayout, 3> layouts;
        std::array<std::vector<std::vector<Address>>, 3> rows;
        const std::uint64_t cycles = 1 + rng() % 200;
        const std::uint32_t width = 1 + rng() % 48;
        std::uint64_t budget = 10000;
        for (int o = 0; o < 3; ++o) {
            LayoutSpec s;
            s.C = 1 + rng() % 4;
            s.H = 1 + rng() % 40;
            s.W = 1 + rng() % 40;
            s.c1 = 1 + rng() % s.C;
            s.h1 = 1 + rng() % s.H;
            s.w1 = 1 + rng() % s.W;
            s.inter_order = rng() % 2 ? "chw" : "hwc";
            s.intra_order = rng() % 2 ? "whc" : "cwh";
            s.num_banks = 1 + rng() % 16;
            s.bandwidth_per_bank = static_cast<std::uint32_t>(oracle::up(s.c1 * s.h1 * s.w1, s.num_banks));
            s.ports_per_bank = 1 + rng() % 3;
            layouts[o].spec = s;
            layouts[o].base = static_cast<Address>(o) * 1'000'000;
            const std::uint64_t n = s.C * s.H * s.W;
            for (Cycle c = 0; c < cycles; ++c) {
                std::vector<Address> r;
                for (std::uint32_t j = 0, k = rng() % (width + 1); j < k && budget > 0; ++j, --budget)
                    r.push_back(layouts[o].base + rng() % n);
                rows[o].push_back(r);
            }
        }
        ExplicitTrace trace(rows);
        auto got = evaluate_layout(trace, layouts, trace.length()).total_cycles;
        auto want = brute_layout_cycles(trace, layouts);
        if (got != want)
            out.fail("trace " + std::to_string(i) + ": " + std::to_string(got) + " != " + std::to_string(want));
    }
    out.detail << "50 random traces match port scheduling";

    // Bank-count monotonicity at a fixed 128 elements per cycle.
    std::vector<std::pair<std::string, std::vector<GemmOp>>> sets = {
        {"resnet18", distinct_shapes(load_topology(kData + "/topologies/resnet18.csv"))},
        {"vit_base", distinct_shapes(load_topology(kData + "/topologies/vit_base.csv"))}};
    std::map<std::string, LayoutTemplate> templates;
    for (const char* f : {"row_major", "column_tiled"}) {
        // inter_order,c1,h1,w1,intra_order
        for (const auto& rec : text::read_csv(read_text_file(kData + "/layouts/" + f + ".csv"))) {
            if (rec.cells.size() != 5 || rec.cells[0] == "dim_order" || rec.cells[0].starts_with("#")) continue;
            LayoutTemplate t;
            t.inter_order = rec.cells[0];
            t.c1_step = text::parse_u64(rec.cells[1], rec.line, "c1");
            t.h1_step = text::parse_u64(rec.cells[2], rec.line, "h1");
            t.w1_step = text::parse_u64(rec.cells[3], rec.line, "w1");
            t.intra_order = rec.cells[4];
            templates[f] = t;
        }
    }
    if (templates.size() != 2) out.fail("layout files unreadable");
    int evaluated = 0;
    for (const auto& [set_name, shapes] : sets)
        for (const auto& [tname, tmpl] : templates)
            for (auto df : {Dataflow::IS, Dataflow::WS, Dataflow::OS})
                for (const auto& g : shapes) {
                    auto trace = generate_demand_trace(map_gemm(g, df), array_cfg(32, 32, df));
                    double prev = 1e300;
                    for (std::uint32_t banks : {1u, 2u, 4u, 8u, 16u}) {
                        LayoutConfig lc;
                        lc.num_banks = banks;
                        lc.bandwidth_per_bank = 128 / banks;
                        lc.ifmap = lc.filter = lc.ofmap = tmpl;
                        auto s = evaluate_layout(trace, lc).slowdown;
                        if (s > prev)
                            out.fail(set_name + " " + tname + " " + std::string(to_string(df)) + " (" +
                                     std::to_string(g.m) + "," + std::to_string(g.n) + "," + std::to_string(g.k) +
                                     "): " + std::to_string(banks) + " banks slower");
                        prev = s;
                    }
                    ++evaluated;
                }
    out.detail << "; bank monotonicity over 1..16 banks on " << evaluated << " ResNet-18/ViT layer traces";
}

void energy_identities(Outcome& out) {
    auto layers = load_topology(kData + "/topologies/resnet18.csv");
    auto table = default_energy_table();
    const char* srams[] = {"ifmap_sram", "filter_sram", "ofmap_sram"};
    int runs = 0;
    for (const auto& l : layers) {
        auto op = to_gemm(l);
        std::map<Dataflow, ActionCounts> by_df;
        for (auto df : {Dataflow::WS, Dataflow::IS}) {
            auto trace = generate_demand_trace(map_gemm(op, df), array_cfg(32, 32, df));
            auto rep = simulate_compute(trace);
            for (bool gating : {false, true}) {
                EnergyOptions eo;
                eo.clock_gating = gating;
                auto counts = count_actions(trace, rep, eo);
                const Cycle cycles = rep.total_cycles;
                const std::uint64_t macs =
                    counts.get("mac", "random") + counts.get("mac", "constant") + counts.get("mac", "gated");
                if (macs != 32ull * 32 * cycles) out.fail(l.name + ": MAC closure");
                for (Operand o : kOperands) {
                    const char* s = srams[static_cast<int>(o)];
                    std::uint64_t sum = 0;
                    for (const char* a : {"idle", "read_random", "read_repeat", "write_random", "write_repeat"})
                        sum += counts.get(s, a);
                    if (sum != cycles * trace.width(o)) out.fail(l.name + ": " + s + " closure");
                }
                auto base = compute_energy(counts, table, cycles, 1000);
                for (double k : {0.5, 2.0, 4.0, 64.0}) {
                    auto e = compute_energy(counts, table.scaled(k), cycles, 1000);
                    if (e.dynamic_pj != k * base.dynamic_pj) out.fail(l.name + ": linearity");
                }
                if (!gating) by_df[df] = counts;
                ++runs;
            }
        }
        const auto ws_w = by_df[Dataflow::WS].get("weight_spad", "write");
        const auto is_w = by_df[Dataflow::IS].get("weight_spad", "write");
        const auto ws_i = by_df[Dataflow::WS].get("ifmap_spad", "write");
        const auto is_i = by_df[Dataflow::IS].get("ifmap_spad", "write");
        // With a single column fold both dataflows fetch each weight once.
        if (op.n > 32 ? !(ws_w < is_w) : !(ws_w <= is_w)) out.fail(l.name + ": WS weight-spad writes not fewer");
        if (op.m > 32 ? !(is_i < ws_i) : !(is_i <= ws_i)) out.fail(l.name + ": IS ifmap-spad writes not fewer");
    }
    out.detail << (out.ok ? "" : " | ") << runs << " ResNet-18 runs: MAC/SRAM closure, linearity, stationarity";
}

void partition_formulas(Outcome& out) {
    const std::uint64_t sizes[] = {1000, 5000, 10000};
    std::size_t rows = 0;
    for (auto M : sizes)
        for (auto N : sizes)
            for (auto K : sizes)
                for (std::uint64_t A : {8u, 16u, 32u})
                    for (std::uint32_t cores : {16u, 32u, 64u})
                        for (auto df : {Dataflow::IS, Dataflow::WS, Dataflow::OS}) {
                            auto dims = map_gemm(GemmOp{M, N, K, ""}, df);
                            auto sweep = sweep_partitions(dims, A, A, cores);
                            std::size_t grids = 0;
                            for (std::uint32_t p = 1; p <= cores; ++p) grids += cores % p == 0;
                            if (sweep.rows.size() != grids * 3) out.fail("row count");
                            Cycle best = ~Cycle{0};
                            for (const auto& r : sweep.rows) {
                                auto want = oracle::scheme_cycles(r.scheme, dims.sr, dims.sc, dims.t, A, A, r.pr, r.pc);
                                if (r.cycles != want || r.pr * r.pc != cores)
                                    out.fail(str(dims) + " " + std::string(to_string(r.scheme)) + " " +
                                             std::to_string(r.pr) + "x" + std::to_string(r.pc));
                                best = std::min(best, r.cycles);
                                ++rows;
                            }
                            if (sweep.rows[sweep.compute_optimal].cycles != best) out.fail("compute pick");
                        }
    out.detail << (out.ok ? "" : " | ") << rows << " sweep rows match the scheme formulas";
}

}  // namespace

int main() {
    struct Entry {
        const char* name;
        Criterion run;
        double budget_s;  // 0: no runtime bound
    };
    const std::vector<Entry> criteria = {
        {"analytical_anchor", analytical_anchor, 60},
        {"vit_latency_ratio", vit_latency_ratio, 300},
        {"sparsity_compute_halving", sparsity_halving, 0},
        {"sparsity_storage_ordering", sparsity_storage, 0},
        {"queue_monotonicity", queue_monotonicity, 0},
        {"channel_scaling", channel_scaling, 0},
        {"layout_oracle", layout_oracle, 0},
        {"energy_identities", energy_identities, 0},
        {"partition_formulas", partition_formulas, 60},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Outcome out;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(out);
        } catch (const std::exception& e) {
            out.fail(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0 && secs >= c.budget_s) out.fail("runtime " + std::to_string(secs) + " s over budget");
        std::printf("%s %s (%.1f s): %s\n", out.ok ? "PASS" : "FAIL", c.name, secs, out.detail.str().c_str());
        std::fflush(stdout);
        failed += !out.ok;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
