#include "arraysim/pipeline.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "arraysim/text.hpp"
#include "json.hpp"

namespace arraysim {

namespace fs = std::filesystem;

StageSet parse_stages(std::string_view list) {
    StageSet s;
    for (auto tok : text::split(list, ',')) {
        const std::string t = text::lower(text::trim(tok));
        if (t.empty() || t == "compute") continue;
        if (t == "all") {
            s.memory = s.layout = s.energy = s.sparsity = true;
        } else if (t == "memory") {
            s.memory = true;
        } else if (t == "layout") {
            s.layout = true;
        } else if (t == "energy") {
            s.energy = true;
        } else if (t == "sparsity") {
            s.sparsity = true;
        } else {
            throw ConfigError("unknown stage '" + t + "' (expected compute, memory, layout, energy, sparsity)");
        }
    }
    return s;
}

std::string to_string(const StageSet& s) {
    std::string out = "compute";
    if (s.memory) out += ",memory";
    if (s.layout) out += ",layout";
    if (s.energy) out += ",energy";
    if (s.sparsity) out += ",sparsity";
    return out;
}

std::string sanitize_name(std::string_view name) {
    std::string out;
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-' || c == '.';
        out += ok ? c : '_';
    }
    return out.empty() ? "layer" : out;
}

namespace {

std::string ratio_label(const SparsityPattern& p) {
    if (p.mode == SparsityMode::RowWise) return "rowwise(" + std::to_string(p.block_m) + ")";
    return std::to_string(p.per_row_n.empty() ? 0 : p.per_row_n[0]) + ":" + std::to_string(p.block_m);
}

struct CoreRun {
    std::size_t core = 0;
    CoreProfile profile;
    Cycle epilogue = 0;
    DemandTrace trace;
    ComputeReport report;
};

void write_file(const fs::path& path, std::string_view content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << content;
    if (!f) throw Error("write failed: " + path.string());
}

}  // namespace

LayerResult simulate_layer(const LayerSpec& layer, std::size_t index, const SimConfig& cfg, const LayerOptions& opt) {
    LayerResult res;
    res.index = index;
    res.name = layer.name;
    res.gemm = to_gemm(layer);
    MappedDims dims = map_gemm(res.gemm, cfg.dataflow);

    // Sparsity reshapes the workload whenever the config enables it; the stage flag only controls reporting.
    std::shared_ptr<const SparseMapping> sparse;
    const std::uint32_t word_bits = cfg.word_bytes * 8;
    auto pattern = materialize_pattern(res.gemm, layer.sparsity, cfg.sparsity, index);
    if (pattern) {
        auto sm = sparse_mapped_dims(dims, *pattern);
        dims = sm.dims;
        sparse = sm.mapping;
    }
    if (opt.stages.sparsity) {
        SparseReportRow row;
        row.layer = layer.name;
        if (pattern) {
            row.ratio = ratio_label(*pattern);
            row.seed = pattern->seed;
            row.storage = storage_report(*pattern, res.gemm.m, cfg.sparsity.rep, word_bits);
        } else {
            const auto m = std::to_string(layer.sparsity ? layer.sparsity->m : cfg.sparsity.block_size);
            row.ratio = m + ":" + m;
            row.storage = dense_storage_report(res.gemm.m, res.gemm.k, cfg.sparsity.rep, word_bits);
        }
        res.sparse = row;
    }
    res.dims = dims;

    // One entry per busy core; a single-core run is the whole GEMM on the configured array.
    std::vector<CoreRun> runs;
    const auto bases = address_bases(cfg);
    std::uint64_t total_pes = 0;
    if (cfg.multicore.num_cores <= 1) {
        CoreProfile prof{cfg.array_rows, cfg.array_cols, 0, 0, 0};
        total_pes = std::uint64_t{prof.rows} * prof.cols;
        DemandTrace t(dims, cfg.array_rows, cfg.array_cols, bases, sparse);
        auto rep = simulate_compute(t);
        runs.push_back({0, prof, 0, std::move(t), rep});
    } else {
        auto plan = partition_workload(dims, cfg);
        for (std::size_t i = 0; i < plan.shards.size(); ++i) {
            auto prof = core_profile(cfg, i);
            total_pes += std::uint64_t{prof.rows} * prof.cols;
            if (plan.shards[i].idle) continue;
            auto t = shard_trace(plan, i, prof, bases, sparse);
            auto rep = simulate_compute(t);
            const Cycle epi = prof.simd_latency + Cycle{prof.nop_hops} * cfg.multicore.hop_latency;
            runs.push_back({i, prof, epi, std::move(t), rep});
        }
    }
    res.cores = std::max<std::uint32_t>(1, cfg.multicore.num_cores);

    ComputeReport& agg = res.compute;
    if (runs.size() == 1 && res.cores == 1) {
        agg = runs[0].report;
    } else {
        agg.rows = runs.front().profile.rows;
        agg.cols = runs.front().profile.cols;
        for (const auto& r : runs) {
            agg.total_cycles = std::max(agg.total_cycles, r.report.total_cycles + r.epilogue);
            agg.macs += r.report.macs;
            agg.folds += r.report.folds;
            for (int o = 0; o < 3; ++o) {
                agg.ops[o].accesses += r.report.ops[o].accesses;
                agg.ops[o].max_bw += r.report.ops[o].max_bw;
            }
        }
        if (agg.total_cycles) {
            agg.utilization = static_cast<double>(dims.sr * dims.sc * dims.t) /
                              (static_cast<double>(total_pes) * static_cast<double>(agg.total_cycles));
            for (auto& o : agg.ops)
                o.avg_bw = static_cast<double>(o.accesses) / static_cast<double>(agg.total_cycles);
        }
    }

    const bool multi = res.cores > 1;
    const std::string stem = "L" + std::to_string(index) + "_" + sanitize_name(layer.name);
    auto core_stem = [&](const CoreRun& r) { return multi ? stem + "_core" + std::to_string(r.core) : stem; };

    if (opt.trace_dir) {
        for (const auto& r : runs)
            for (Operand op : kOperands) {
                auto p = *opt.trace_dir / (core_stem(r) + "_" + std::string(to_string(op)) + ".csv");
                std::ofstream f(p);
                if (!f) throw Error("cannot write " + p.string());
                write_trace_csv(r.trace, op, f);
                res.dumped.push_back(p);
            }
    }

    if (opt.stages.memory) {
        StallReport st;
        st.compute_cycles = agg.total_cycles;
        DramStats ds;
        double lat_sum = 0;
        for (const auto& r : runs) {
            const auto mt = interleave_traces(r.trace, interleave_options(cfg));
            if (opt.trace_dir) {
                auto p = *opt.trace_dir / (core_stem(r) + "_requests.csv");
                std::ofstream f(p);
                if (!f) throw Error("cannot write " + p.string());
                write_request_trace(mt, f);
                res.dumped.push_back(p);
            }
            MemoryStageResult m;
            if (opt.latency_dir) {
                auto lat = import_latencies(*opt.latency_dir / (core_stem(r) + "_latencies.csv"), mt.requests.size());
                m = run_memory_stage(mt, cfg, &lat);
            } else {
                m = run_memory_stage(mt, cfg);
            }
            st.total_cycles = std::max(st.total_cycles, m.stalls.total_cycles + r.epilogue);
            res.requests += m.requests;
            ds.total_reads += m.dram.total_reads;
            ds.total_writes += m.dram.total_writes;
            ds.row_hits += m.dram.row_hits;
            ds.row_misses += m.dram.row_misses;
            ds.row_conflicts += m.dram.row_conflicts;
            ds.bytes += m.dram.bytes;
            ds.throughput_mbps += m.dram.throughput_mbps;
            ds.span_cycles = std::max(ds.span_cycles, m.dram.span_cycles);
            lat_sum += m.dram.avg_latency * static_cast<double>(m.dram.total_reads + m.dram.total_writes);
        }
        const auto n = ds.total_reads + ds.total_writes;
        ds.avg_latency = n ? lat_sum / static_cast<double>(n) : 0.0;
        st.stall_cycles = st.total_cycles - st.compute_cycles;
        st.stall_fraction =
            st.total_cycles ? static_cast<double>(st.stall_cycles) / static_cast<double>(st.total_cycles) : 0.0;
        res.stalls = st;
        res.dram = ds;
    }

    if (opt.stages.layout) {
        LayoutReport lr;
        lr.baseline_cycles = agg.total_cycles;
        for (const auto& r : runs) {
            auto one = evaluate_layout(r.trace, cfg.layout);
            lr.total_cycles = std::max(lr.total_cycles, one.total_cycles + r.epilogue);
        }
        lr.slowdown = lr.baseline_cycles ? static_cast<double>(lr.total_cycles) / static_cast<double>(lr.baseline_cycles)
                                         : 0.0;
        res.layout = lr;
    }

    if (opt.stages.energy) {
        if (!opt.energy_table) throw ConfigError("energy stage needs an energy table");
        EnergyOptions eo{cfg.energy.row_size_elems, cfg.energy.bank_size_rows, cfg.energy.clock_gating};
        ActionCounts counts;
        for (const auto& r : runs) counts.merge(count_actions(r.trace, r.report, eo));
        // Every core leaks for the whole layer, busy or not.
        EnergyTable table = *opt.energy_table;
        for (const auto& [comp, leak] : opt.energy_table->leakages()) table.set_leakage(comp, leak * res.cores);
        res.energy = compute_energy(counts, table, agg.total_cycles, cfg.clock_mhz);
        res.actions = std::move(counts);
    }
    return res;
}

std::vector<LayerResult> simulate_layers(const std::vector<LayerSpec>& layers, const SimConfig& cfg,
                                         const LayerOptions& opt, unsigned jobs) {
    std::vector<LayerResult> out(layers.size());
    std::vector<std::exception_ptr> errors(layers.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= layers.size() || failed.load()) return;
            try {
                out[i] = simulate_layer(layers[i], i, cfg, opt);
            } catch (...) {
                errors[i] = std::current_exception();
                failed = true;
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(layers.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) {
            // Drop dumps from layers that did finish.
            for (auto& r : out)
                for (auto& p : r.dumped) {
                    std::error_code ec;
                    fs::remove(p, ec);
                }
            std::rethrow_exception(e);
        }
    return out;
}

std::vector<ReportFile> build_reports(const std::vector<LayerResult>& results, const SimConfig& cfg,
                                      const StageSet& stages) {
    std::vector<ReportFile> files;
    const std::string df(to_string(cfg.dataflow));

    std::string compute =
        "Layer,Dataflow,M,N,K,Sr,Sc,T,Cores,TotalCycles,Utilization,Folds,MACs\n";
    std::string bw =
        "Layer,IfmapReads,FilterReads,OfmapWrites,IfmapAvgBW,IfmapMaxBW,FilterAvgBW,FilterMaxBW,OfmapAvgBW,"
        "OfmapMaxBW\n";
    for (const auto& r : results) {
        const auto& c = r.compute;
        compute += text::csv_line({r.name, df, std::to_string(r.gemm.m), std::to_string(r.gemm.n),
                                   std::to_string(r.gemm.k), std::to_string(r.dims.sr), std::to_string(r.dims.sc),
                                   std::to_string(r.dims.t), std::to_string(r.cores), std::to_string(c.total_cycles),
                                   text::fmt_ratio(c.utilization), std::to_string(c.folds), std::to_string(c.macs)});
        std::vector<std::string> row{r.name};
        for (Operand op : kOperands) row.push_back(std::to_string(c.op(op).accesses));
        for (Operand op : kOperands) {
            row.push_back(text::fmt_ratio(c.op(op).avg_bw));
            row.push_back(std::to_string(c.op(op).max_bw));
        }
        bw += text::csv_line(row);
    }
    files.push_back({"COMPUTE_REPORT.csv", compute});
    files.push_back({"BANDWIDTH_REPORT.csv", bw});

    if (stages.sparsity) {
        std::vector<SparseReportRow> rows;
        for (const auto& r : results)
            if (r.sparse) rows.push_back(*r.sparse);
        files.push_back({"SPARSE_REPORT.csv", sparse_report_csv(rows)});
    }
    if (stages.memory) {
        std::string stall = stall_report_header();
        std::string mem = "Layer,Requests,Reads,Writes,RowHits,RowMisses,RowConflicts,AvgLatency,ThroughputMBps\n";
        for (const auto& r : results) {
            stall += stall_report_line(r.name, *r.stalls);
            const auto& d = *r.dram;
            mem += text::csv_line({r.name, std::to_string(r.requests), std::to_string(d.total_reads),
                                   std::to_string(d.total_writes), std::to_string(d.row_hits),
                                   std::to_string(d.row_misses), std::to_string(d.row_conflicts),
                                   text::fmt_ratio(d.avg_latency), text::fmt_ratio(d.throughput_mbps)});
        }
        files.push_back({"STALL_REPORT.csv", stall});
        files.push_back({"MEMORY_REPORT.csv", mem});
    }
    if (stages.layout) {
        std::string lay = layout_report_header();
        for (const auto& r : results) lay += layout_report_line(r.name, cfg.dataflow, cfg.layout, *r.layout);
        files.push_back({"LAYOUT_REPORT.csv", lay});
    }
    if (stages.energy) {
        std::string rep = energy_report_header();
        std::string sum = "Layer,Cycles,Energy_pJ,Power_mW,EdP\n";
        std::string actions;
        for (const auto& r : results) {
            rep += energy_report_lines(r.name, *r.energy);
            const auto& e = *r.energy;
            sum += text::csv_line({r.name, std::to_string(e.cycles), text::fmt_double(e.total_pj),
                                   text::fmt_double(e.power_mw), text::fmt_double(e.edp)});
            actions += "---\nlayer: " + r.name + "\n" + export_action_counts(*r.actions);
        }
        files.push_back({"ENERGY_REPORT.csv", rep});
        files.push_back({"ENERGY_SUMMARY.csv", sum});
        files.push_back({"ACTION_COUNTS.yaml", actions});
    }
    return files;
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr)) throw Error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text_file(path)); }

RunSummary run_pipeline(const RunOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    auto layers = load_topology(opt.topology);
    if (layers.empty()) throw ValidationError("topology has no layers: " + opt.topology.string());
    SimConfig cfg = load_config(opt.config);
    if (opt.seed) cfg.sparsity.seed = *opt.seed;

    std::optional<EnergyTable> table;
    if (opt.stages.energy)
        table = cfg.energy.table_path.empty() ? default_energy_table() : load_energy_table(cfg.energy.table_path);

    std::vector<fs::path> created;
    bool made_out = false, made_traces = false;
    const fs::path trace_dir = opt.out / "traces";
    auto cleanup = [&] {
        std::error_code ec;
        for (auto& p : created) fs::remove(p, ec);
        if (made_traces) fs::remove_all(trace_dir, ec);
        if (made_out && fs::is_empty(opt.out, ec)) fs::remove(opt.out, ec);
    };

    try {
        if (!fs::exists(opt.out)) {
            fs::create_directories(opt.out);
            made_out = true;
        } else if (!fs::is_directory(opt.out)) {
            throw Error("output path is not a directory: " + opt.out.string());
        }
        LayerOptions lo;
        lo.stages = opt.stages;
        lo.energy_table = table ? &*table : nullptr;
        lo.latency_dir = opt.latency_dir;
        if (opt.dump_traces) {
            if (!fs::exists(trace_dir)) made_traces = true;
            fs::create_directories(trace_dir);
            lo.trace_dir = trace_dir;
        }
        auto results = simulate_layers(layers, cfg, lo, opt.jobs);
        for (auto& r : results)
            for (auto& p : r.dumped) created.push_back(p);

        RunSummary sum;
        sum.layers = results.size();
        for (const auto& f : build_reports(results, cfg, opt.stages)) {
            const auto p = opt.out / f.name;
            created.push_back(p);
            write_file(p, f.content);
        }

        nlohmann::ordered_json m;
        m["tool"] = "arraysim";
        m["version"] = kToolVersion;
        m["run_name"] = cfg.run_name;
        m["config"] = opt.config.string();
        m["topology"] = opt.topology.string();
        m["output_dir"] = opt.out.string();
        m["stages"] = to_string(opt.stages);
        m["seed"] = cfg.sparsity.seed;
        m["jobs"] = opt.jobs;
        m["layers"] = results.size();
        auto files = nlohmann::ordered_json::array();
        for (const auto& p : created) {
            files.push_back({{"file", fs::relative(p, opt.out).generic_string()},
                             {"bytes", fs::file_size(p)},
                             {"sha256", sha256_file(p)}});
        }
        m["files"] = files;
        m["wall_clock_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto mp = opt.out / "run_manifest.json";
        created.push_back(mp);
        write_file(mp, m.dump(2) + "\n");
        sum.files = created;
        return sum;
    } catch (...) {
        cleanup();
        throw;
    }
}

}  // namespace arraysim
