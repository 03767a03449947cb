#include "arraysim/workload.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "arraysim/text.hpp"

namespace arraysim {

namespace {

using text::lower;
using text::trim;

bool is_order(const std::string& s) {
    std::string sorted = s;
    std::sort(sorted.begin(), sorted.end());
    return sorted == "chw";
}

std::vector<double> parse_weights(std::string_view v, std::size_t line, std::string_view what) {
    std::vector<double> out;
    for (auto& tok : text::split(v, ',')) {
        if (trim(tok).empty()) continue;
        out.push_back(text::parse_double(tok, line, what));
    }
    return out;
}

std::vector<CoreProfile> parse_core_profiles(std::string_view v, std::size_t line) {
    // "8x8:simd_len:simd_latency:hops; 16x16; ..."
    std::vector<CoreProfile> out;
    for (auto& entry : text::split(v, ';')) {
        auto e = trim(entry);
        if (e.empty()) continue;
        auto fields = text::split(e, ':');
        auto shape = text::split(lower(fields[0]), 'x');
        if (shape.size() != 2) throw ParseError("core profile '" + std::string(e) + "' needs RxC", line);
        CoreProfile p;
        p.rows = static_cast<std::uint32_t>(text::parse_u64(shape[0], line, "CoreProfiles"));
        p.cols = static_cast<std::uint32_t>(text::parse_u64(shape[1], line, "CoreProfiles"));
        if (fields.size() > 1) p.simd_len = static_cast<std::uint32_t>(text::parse_u64(fields[1], line, "CoreProfiles"));
        if (fields.size() > 2) p.simd_latency = text::parse_u64(fields[2], line, "CoreProfiles");
        if (fields.size() > 3) p.nop_hops = static_cast<std::uint32_t>(text::parse_u64(fields[3], line, "CoreProfiles"));
        if (fields.size() > 4) throw ParseError("core profile '" + std::string(e) + "' has too many fields", line);
        out.push_back(p);
    }
    return out;
}

LayoutTemplate parse_layout_cells(const std::vector<std::string>& cells, std::size_t line) {
    if (cells.size() < 4 || cells.size() > 5)
        throw ParseError("layout entry needs dim_order,c1_step,h1_step,w1_step[,intra_order]", line);
    LayoutTemplate t;
    t.inter_order = lower(cells[0]);
    t.c1_step = text::parse_u64(cells[1], line, "c1_step");
    t.h1_step = text::parse_u64(cells[2], line, "h1_step");
    t.w1_step = text::parse_u64(cells[3], line, "w1_step");
    if (cells.size() == 5) t.intra_order = lower(cells[4]);
    if (!is_order(t.inter_order) || !is_order(t.intra_order))
        throw ParseError("layout dimension order must be a permutation of c,h,w", line);
    return t;
}

LayoutTemplate load_layout_file(const std::filesystem::path& path) {
    auto records = text::read_csv(read_text_file(path));
    for (auto& rec : records) {
        if (!rec.cells.empty() && lower(rec.cells[0]) == "dim_order") continue;
        return parse_layout_cells(rec.cells, rec.line);
    }
    throw ParseError("layout file " + path.string() + " has no data row");
}

std::string layout_value(const LayoutTemplate& t) {
    return t.inter_order + "," + std::to_string(t.c1_step) + "," + std::to_string(t.h1_step) + "," +
           std::to_string(t.w1_step) + "," + t.intra_order;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += text::fmt_double(v[i]);
    }
    return out;
}

template <typename T>
T narrow(std::uint64_t v, std::size_t line, std::string_view key) {
    if (v > std::numeric_limits<T>::max()) throw ParseError("value out of range for " + std::string(key), line);
    return static_cast<T>(v);
}

struct KeyHandler {
    std::function<void(SimConfig&, std::string_view, std::size_t)> apply;
};

using HandlerTable = std::map<std::string, std::map<std::string, KeyHandler>>;

#define U32(field)                                                                                   \
    KeyHandler{[](SimConfig& c, std::string_view v, std::size_t l) {                                  \
        c.field = narrow<std::uint32_t>(text::parse_u64(v, l, #field), l, #field);                   \
    }}
#define U64(field) \
    KeyHandler{[](SimConfig& c, std::string_view v, std::size_t l) { c.field = text::parse_u64(v, l, #field); }}
#define DBL(field) \
    KeyHandler{[](SimConfig& c, std::string_view v, std::size_t l) { c.field = text::parse_double(v, l, #field); }}
#define BOOL(field) \
    KeyHandler{[](SimConfig& c, std::string_view v, std::size_t l) { c.field = text::parse_bool(v, l, #field); }}

const HandlerTable& handlers() {
    static const HandlerTable table = {
        {"general",
         {
             {"runname", KeyHandler{[](SimConfig& c, std::string_view v, std::size_t) { c.run_name = std::string(v); }}},
         }},
        {"architecture",
         {
             {"arrayheight", U32(array_rows)},
             {"arraywidth", U32(array_cols)},
             {"dataflow", KeyHandler{[](SimConfig& c, std::string_view v, std::size_t l) {
                  try {
                      c.dataflow = parse_dataflow(v);
                  } catch (const ParseError& e) {
                      throw ParseError(e.what(), l);
                  }
              }}},
             {"ifmapsramszkb", U32(ifmap_sram_kb)},
             {"filtersramszkb", U32(filter_sram_kb)},
             {"ofmapsramszkb", U32(ofmap_sram_kb)},
             {"wordbytes", U32(word_bytes)},
             {"ifmapoffset", U64(ifmap_base)},
             {"filteroffset", U64(filter_base)},
             {"ofmapoffset", U64(ofmap_base)},
             {"clockmhz", DBL(clock_mhz)},
         }},
        {"multicore",
         {
             {"numcores", U32(multicore.num_cores)},
             {"partition", KeyHandler{[](SimConfig& c, std::string_view v, std::size_t l) {
                  try {
                      c.multicore.scheme = parse_partition_scheme(v);
                  } catch (const ParseError& e) {
                      throw ParseError(e.what(), l);
                  }
              }}},
             {"pr", U32(multicore.pr)},
             {"pc", U32(multicore.pc)},
             {"hoplatency", U64(multicore.hop_latency)},
             {"coreprofiles", KeyHandler{[](SimConfig& c, std::string_view v, std::size_t l) {
                  c.multicore.core_profiles = parse_core_profiles(v, l);
              }}},
             {"rowweights", KeyHandler{[](SimConfig& c, std::string_view v, std::size_t l) {
                  c.multicore.row_weights = parse_weights(v, l, "RowWeights");
              }}},
             {"colweights", KeyHandler{[](SimConfig& c, std::string_view v, std::size_t l) {
                  c.multicore.col_weights = parse_weights(v, l, "ColWeights");
              }}},
         }},
        {"sparsity",
         {
             {"sparsitysupport", BOOL(sparsity.enabled)},
             {"sparserep", KeyHandler{[](SimConfig& c, std::string_view v, std::size_t l) {
                  try {
                      c.sparsity.rep = parse_sparse_rep(v);
                  } catch (const ParseError& e) {
                      throw ParseError(e.what(), l);
                  }
              }}},
             {"optimizedmapping", BOOL(sparsity.optimized_mapping)},
             {"blocksize", U32(sparsity.block_size)},
             {"seed", U64(sparsity.seed)},
         }},
        {"memory",
         {
             {"channels", U32(dram.channels)},
             {"banksperchannel", U32(dram.banks_per_channel)},
             {"rowsizebytes", U64(dram.row_size_bytes)},
             {"capacityperchannelbytes", U64(dram.capacity_per_channel)},
             {"freqmhz", DBL(dram.freq_mhz)},
             {"trcd", U32(dram.timings.tRCD)},
             {"trp", U32(dram.timings.tRP)},
             {"tcl", U32(dram.timings.tCL)},
             {"tburst", U32(dram.timings.tBurst)},
             {"addressmap", KeyHandler{[](SimConfig& c, std::string_view v, std::size_t l) {
                  try {
                      c.dram.address_map = parse_address_map(v);
                  } catch (const ParseError& e) {
                      throw ParseError(e.what(), l);
                  }
              }}},
             {"readqueueentries", U32(queues.read_entries)},
             {"writequeueentries", U32(queues.write_entries)},
             {"sramfilter", BOOL(memory.sram_filter)},
             {"linebytes", U32(memory.line_bytes)},
             {"rowcoalescing", BOOL(memory.row_coalescing)},
             {"clockratio", DBL(memory.clock_ratio)},
         }},
        {"layout",
         {
             {"numbanks", U32(layout.num_banks)},
             {"bandwidthperbank", U32(layout.bandwidth_per_bank)},
             {"portsperbank", U32(layout.ports_per_bank)},
             {"ifmaplayout", KeyHandler{[](SimConfig& c, std::string_view v, std::size_t l) {
                  c.layout.ifmap = parse_layout_cells(text::split(v, ','), l);
              }}},
             {"filterlayout", KeyHandler{[](SimConfig& c, std::string_view v, std::size_t l) {
                  c.layout.filter = parse_layout_cells(text::split(v, ','), l);
              }}},
             {"ofmaplayout", KeyHandler{[](SimConfig& c, std::string_view v, std::size_t l) {
                  c.layout.ofmap = parse_layout_cells(text::split(v, ','), l);
              }}},
         }},
        {"energy",
         {
             {"energytable", KeyHandler{[](SimConfig& c, std::string_view v, std::size_t) {
                  c.energy.table_path = std::string(v);
              }}},
             {"rowsizeelems", U64(energy.row_size_elems)},
             {"banksizerows", U32(energy.bank_size_rows)},
             {"clockgating", BOOL(energy.clock_gating)},
         }},
    };
    return table;
}

#undef U32
#undef U64
#undef DBL
#undef BOOL

}  // namespace

std::string_view to_string(PartitionScheme s) {
    switch (s) {
        case PartitionScheme::Spatial: return "spatial";
        case PartitionScheme::SpatioTemporal1: return "st1";
        case PartitionScheme::SpatioTemporal2: return "st2";
    }
    return "?";
}

PartitionScheme parse_partition_scheme(std::string_view t) {
    auto s = lower(trim(t));
    if (s == "spatial") return PartitionScheme::Spatial;
    if (s == "st1" || s == "spatiotemporal1" || s == "spatio_temporal1") return PartitionScheme::SpatioTemporal1;
    if (s == "st2" || s == "spatiotemporal2" || s == "spatio_temporal2") return PartitionScheme::SpatioTemporal2;
    throw ParseError("unknown partition scheme '" + std::string(t) + "'");
}

std::string_view to_string(SparseRep r) {
    switch (r) {
        case SparseRep::CSR: return "csr";
        case SparseRep::CSC: return "csc";
        case SparseRep::EllpackBlock: return "ellpack_block";
    }
    return "?";
}

SparseRep parse_sparse_rep(std::string_view t) {
    auto s = lower(trim(t));
    if (s == "csr") return SparseRep::CSR;
    if (s == "csc") return SparseRep::CSC;
    if (s == "ellpack_block" || s == "ellpackblock" || s == "blocked_ellpack") return SparseRep::EllpackBlock;
    throw ParseError("unknown sparse representation '" + std::string(t) + "'");
}

std::string_view to_string(AddressMap m) {
    switch (m) {
        case AddressMap::RoBaChCo: return "RoBaChCo";
        case AddressMap::ChRoBaCo: return "ChRoBaCo";
    }
    return "?";
}

AddressMap parse_address_map(std::string_view t) {
    auto s = lower(trim(t));
    if (s == "robachco") return AddressMap::RoBaChCo;
    if (s == "chrobaco") return AddressMap::ChRoBaCo;
    throw ParseError("unknown address map '" + std::string(t) + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

SimConfig parse_config_impl(std::string_view content, const std::filesystem::path* base_dir) {
    SimConfig cfg;
    std::string section;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < content.size()) {
        auto end = content.find('\n', start);
        if (end == std::string_view::npos) end = content.size();
        auto raw = content.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        auto line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("malformed section header", line_no);
            section = lower(trim(line.substr(1, line.size() - 2)));
            if (!handlers().count(section)) throw ParseError("unknown section [" + section + "]", line_no);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
        if (section.empty()) throw ParseError("key outside of any section", line_no);
        auto key_raw = trim(line.substr(0, eq));
        auto key = lower(key_raw);
        auto value = trim(line.substr(eq + 1));
        auto& keys = handlers().at(section);

        if (base_dir && key.size() > 10 && key.ends_with("layoutfile")) {
            auto op = key.substr(0, key.size() - 10);
            std::filesystem::path p(std::string{value});
            if (p.is_relative()) p = *base_dir / p;
            auto tmpl = load_layout_file(p);
            if (op == "ifmap") cfg.layout.ifmap = tmpl;
            else if (op == "filter") cfg.layout.filter = tmpl;
            else if (op == "ofmap") cfg.layout.ofmap = tmpl;
            else throw ParseError("unknown key '" + std::string(key_raw) + "' in [" + section + "]", line_no);
            continue;
        }
        auto it = keys.find(key);
        if (it == keys.end())
            throw ParseError("unknown key '" + std::string(key_raw) + "' in [" + section + "]", line_no);
        it->second.apply(cfg, value, line_no);
        seen.insert(section + "." + key);
    }
    for (const char* k : {"arrayheight", "arraywidth", "dataflow"}) {
        if (!seen.count(std::string("architecture.") + k)) {
            static const std::map<std::string, std::string> pretty = {
                {"arrayheight", "ArrayHeight"}, {"arraywidth", "ArrayWidth"}, {"dataflow", "Dataflow"}};
            throw ParseError("missing mandatory key '" + pretty.at(k) + "' in [architecture]");
        }
    }
    if (base_dir && !cfg.energy.table_path.empty()) {
        std::filesystem::path p(cfg.energy.table_path);
        if (p.is_relative()) cfg.energy.table_path = (*base_dir / p).lexically_normal().string();
    }
    validate(cfg);
    return cfg;
}

}  // namespace

SimConfig parse_config(std::string_view content) { return parse_config_impl(content, nullptr); }

SimConfig load_config(const std::filesystem::path& path) {
    auto base = path.parent_path();
    return parse_config_impl(read_text_file(path), &base);
}

void validate(const SimConfig& c) {
    auto fail = [](const std::string& m) { throw ValidationError(m); };
    if (c.array_rows < 1 || c.array_cols < 1) fail("array dimensions must be >= 1");
    if (c.ifmap_sram_kb < 1 || c.filter_sram_kb < 1 || c.ofmap_sram_kb < 1) fail("SRAM sizes must be >= 1 KiB");
    if (c.word_bytes < 1) fail("WordBytes must be >= 1");
    if (!(c.clock_mhz > 0)) fail("ClockMHz must be positive");

    const auto& mc = c.multicore;
    if (mc.num_cores < 1) fail("NumCores must be >= 1");
    if (mc.pr < 1 || mc.pc < 1) fail("Pr and Pc must be >= 1");
    if (std::uint64_t{mc.pr} * mc.pc != mc.num_cores)
        fail("Pr*Pc = " + std::to_string(std::uint64_t{mc.pr} * mc.pc) + " does not equal NumCores = " +
             std::to_string(mc.num_cores));
    if (!mc.core_profiles.empty() && mc.core_profiles.size() != mc.num_cores)
        fail("CoreProfiles must list one entry per core");
    for (auto& p : mc.core_profiles)
        if (p.rows < 1 || p.cols < 1) fail("core profile dimensions must be >= 1");
    auto check_weights = [&](const std::vector<double>& w, std::uint32_t n, const char* name) {
        if (w.empty()) return;
        if (w.size() != n) fail(std::string(name) + " must have one weight per grid slice");
        for (double x : w)
            if (!(x >= 0)) fail(std::string(name) + " must be non-negative");
        double sum = 0;
        for (double x : w) sum += x;
        if (!(sum > 0)) fail(std::string(name) + " must not all be zero");
    };
    check_weights(mc.row_weights, mc.pr, "RowWeights");
    check_weights(mc.col_weights, mc.pc, "ColWeights");

    if (c.sparsity.enabled && !is_power_of_two(c.sparsity.block_size))
        fail("BlockSize must be a power of two");

    const auto& d = c.dram;
    if (d.channels < 1 || d.banks_per_channel < 1) fail("DRAM channels and banks must be >= 1");
    if (d.row_size_bytes < 1) fail("DRAM row size must be >= 1");
    if (!is_power_of_two(d.capacity_per_channel)) fail("DRAM capacity per channel must be a power of two");
    if (d.capacity_per_channel < d.row_size_bytes * d.banks_per_channel)
        fail("DRAM capacity per channel smaller than one row per bank");
    if (d.timings.tRCD < 1 || d.timings.tRP < 1 || d.timings.tCL < 1 || d.timings.tBurst < 1)
        fail("DRAM timings must be >= 1");
    if (!(d.freq_mhz > 0)) fail("DRAM FreqMHz must be positive");
    if (c.queues.read_entries < 1 || c.queues.write_entries < 1) fail("queue entries must be >= 1");
    if (c.memory.line_bytes < c.word_bytes || c.memory.line_bytes % c.word_bytes != 0)
        fail("LineBytes must be a positive multiple of WordBytes");
    if (!(c.memory.clock_ratio > 0)) fail("ClockRatio must be positive");

    const auto& l = c.layout;
    if (l.num_banks < 1 || l.bandwidth_per_bank < 1 || l.ports_per_bank < 1)
        fail("layout banks, bandwidth and ports must be >= 1");
    for (auto* t : {&l.ifmap, &l.filter, &l.ofmap}) {
        if (!is_order(t->inter_order) || !is_order(t->intra_order))
            fail("layout dimension orders must be permutations of chw");
        if (t->c1_step < 1 || t->h1_step < 1) fail("layout steps must be >= 1");
    }
    if (c.energy.row_size_elems < 1) fail("RowSizeElems must be >= 1");
    if (c.energy.bank_size_rows < 1) fail("BankSizeRows must be >= 1");
}

std::string serialize_config(const SimConfig& c) {
    std::ostringstream o;
    auto b = [](bool v) { return v ? "true" : "false"; };
    o << "[general]\nRunName = " << c.run_name << "\n\n";
    o << "[architecture]\n"
      << "ArrayHeight = " << c.array_rows << "\n"
      << "ArrayWidth = " << c.array_cols << "\n"
      << "Dataflow = " << to_string(c.dataflow) << "\n"
      << "IfmapSramSzkB = " << c.ifmap_sram_kb << "\n"
      << "FilterSramSzkB = " << c.filter_sram_kb << "\n"
      << "OfmapSramSzkB = " << c.ofmap_sram_kb << "\n"
      << "WordBytes = " << c.word_bytes << "\n"
      << "IfmapOffset = " << c.ifmap_base << "\n"
      << "FilterOffset = " << c.filter_base << "\n"
      << "OfmapOffset = " << c.ofmap_base << "\n"
      << "ClockMHz = " << text::fmt_double(c.clock_mhz) << "\n\n";
    o << "[multicore]\n"
      << "NumCores = " << c.multicore.num_cores << "\n"
      << "Partition = " << to_string(c.multicore.scheme) << "\n"
      << "Pr = " << c.multicore.pr << "\n"
      << "Pc = " << c.multicore.pc << "\n"
      << "HopLatency = " << c.multicore.hop_latency << "\n";
    if (!c.multicore.core_profiles.empty()) {
        o << "CoreProfiles = ";
        for (std::size_t i = 0; i < c.multicore.core_profiles.size(); ++i) {
            auto& p = c.multicore.core_profiles[i];
            if (i) o << "; ";
            o << p.rows << "x" << p.cols << ":" << p.simd_len << ":" << p.simd_latency << ":" << p.nop_hops;
        }
        o << "\n";
    }
    if (!c.multicore.row_weights.empty()) o << "RowWeights = " << join_doubles(c.multicore.row_weights) << "\n";
    if (!c.multicore.col_weights.empty()) o << "ColWeights = " << join_doubles(c.multicore.col_weights) << "\n";
    o << "\n[sparsity]\n"
      << "SparsitySupport = " << b(c.sparsity.enabled) << "\n"
      << "SparseRep = " << to_string(c.sparsity.rep) << "\n"
      << "OptimizedMapping = " << b(c.sparsity.optimized_mapping) << "\n"
      << "BlockSize = " << c.sparsity.block_size << "\n"
      << "Seed = " << c.sparsity.seed << "\n\n";
    o << "[memory]\n"
      << "Channels = " << c.dram.channels << "\n"
      << "BanksPerChannel = " << c.dram.banks_per_channel << "\n"
      << "RowSizeBytes = " << c.dram.row_size_bytes << "\n"
      << "CapacityPerChannelBytes = " << c.dram.capacity_per_channel << "\n"
      << "FreqMHz = " << text::fmt_double(c.dram.freq_mhz) << "\n"
      << "tRCD = " << c.dram.timings.tRCD << "\n"
      << "tRP = " << c.dram.timings.tRP << "\n"
      << "tCL = " << c.dram.timings.tCL << "\n"
      << "tBurst = " << c.dram.timings.tBurst << "\n"
      << "AddressMap = " << to_string(c.dram.address_map) << "\n"
      << "ReadQueueEntries = " << c.queues.read_entries << "\n"
      << "WriteQueueEntries = " << c.queues.write_entries << "\n"
      << "SramFilter = " << b(c.memory.sram_filter) << "\n"
      << "LineBytes = " << c.memory.line_bytes << "\n"
      << "RowCoalescing = " << b(c.memory.row_coalescing) << "\n"
      << "ClockRatio = " << text::fmt_double(c.memory.clock_ratio) << "\n\n";
    o << "[layout]\n"
      << "NumBanks = " << c.layout.num_banks << "\n"
      << "BandwidthPerBank = " << c.layout.bandwidth_per_bank << "\n"
      << "PortsPerBank = " << c.layout.ports_per_bank << "\n"
      << "IfmapLayout = " << layout_value(c.layout.ifmap) << "\n"
      << "FilterLayout = " << layout_value(c.layout.filter) << "\n"
      << "OfmapLayout = " << layout_value(c.layout.ofmap) << "\n\n";
    o << "[energy]\n";
    if (!c.energy.table_path.empty()) o << "EnergyTable = " << c.energy.table_path << "\n";
    o << "RowSizeElems = " << c.energy.row_size_elems << "\n"
      << "BankSizeRows = " << c.energy.bank_size_rows << "\n"
      << "ClockGating = " << b(c.energy.clock_gating) << "\n";
    return o.str();
}

std::vector<LayerSpec> parse_topology(std::string_view content, TopologyKind kind) {
    auto records = text::read_csv(content);
    std::vector<LayerSpec> out;
    if (records.empty()) throw ParseError("topology has no header row");
    const auto& header = records.front();
    if (kind == TopologyKind::Auto) {
        if (header.cells.size() >= 2 && lower(header.cells[1]) == "m") kind = TopologyKind::Gemm;
        else if (header.cells.size() >= 2 && lower(header.cells[1]).starts_with("ifmap")) kind = TopologyKind::Conv;
        else throw ParseError("unrecognized topology header", header.line);
    }
    const std::size_t dims = kind == TopologyKind::Gemm ? 3 : 7;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.cells.size() < dims + 1)
            throw ParseError("expected " + std::to_string(dims) + " dimensions after the layer name", rec.line);
        if (rec.cells.size() > dims + 2) throw ParseError("too many columns", rec.line);
        LayerSpec layer;
        layer.name = rec.cells[0];
        std::vector<std::uint64_t> v;
        for (std::size_t i = 1; i <= dims; ++i) v.push_back(text::parse_u64(rec.cells[i], rec.line, "dimension"));
        for (auto x : v)
            if (x == 0) throw ValidationError("layer '" + layer.name + "' has a zero dimension (line " +
                                              std::to_string(rec.line) + ")");
        if (kind == TopologyKind::Gemm) {
            layer.kind = LayerKind::Gemm;
            layer.gemm = GemmOp{v[0], v[1], v[2], layer.name};
        } else {
            layer.kind = LayerKind::Conv;
            layer.conv = ConvShape{v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
        }
        if (rec.cells.size() == dims + 2 && !rec.cells[dims + 1].empty()) {
            const auto& tok = rec.cells[dims + 1];
            auto parts = text::split(tok, ':');
            if (parts.size() != 2) throw ParseError("malformed sparsity token '" + tok + "'", rec.line);
            SparsityRatio s;
            s.n = static_cast<std::uint32_t>(text::parse_u64(parts[0], rec.line, "sparsity N"));
            s.m = static_cast<std::uint32_t>(text::parse_u64(parts[1], rec.line, "sparsity M"));
            if (s.n == 0 || s.m == 0) throw ParseError("malformed sparsity token '" + tok + "'", rec.line);
            if (s.n > s.m) throw ValidationError("sparsity N > M in '" + tok + "' (line " + std::to_string(rec.line) + ")");
            layer.sparsity = s;
        }
        out.push_back(std::move(layer));
    }
    return out;
}

std::vector<LayerSpec> load_topology(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("topology file not found: " + path.string());
    return parse_topology(read_text_file(path), TopologyKind::Auto);
}

GemmOp lower_conv_to_gemm(const LayerSpec& layer) {
    if (layer.kind != LayerKind::Conv) throw ValidationError("layer '" + layer.name + "' is not a convolution");
    const auto& c = layer.conv;
    if (c.filt_h > c.ifmap_h || c.filt_w > c.ifmap_w)
        throw ValidationError("layer '" + layer.name + "': filter larger than ifmap");
    if (c.stride < 1) throw ValidationError("layer '" + layer.name + "': stride must be >= 1");
    std::uint64_t out_h = (c.ifmap_h - c.filt_h) / c.stride + 1;
    std::uint64_t out_w = (c.ifmap_w - c.filt_w) / c.stride + 1;
    return GemmOp{c.num_filters, out_h * out_w, c.filt_h * c.filt_w * c.channels, layer.name};
}

GemmOp to_gemm(const LayerSpec& layer) {
    return layer.kind == LayerKind::Conv ? lower_conv_to_gemm(layer) : layer.gemm;
}

}  // namespace arraysim
