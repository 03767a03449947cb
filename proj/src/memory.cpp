#include "arraysim/memory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <list>
#include <ostream>
#include <queue>
#include <unordered_map>

#include "arraysim/text.hpp"

namespace arraysim {

std::uint64_t MemoryTrace::reads() const { return requests.size() - writes.size(); }

InterleaveOptions interleave_options(const SimConfig& cfg) {
    InterleaveOptions o;
    o.sram_filter = cfg.memory.sram_filter;
    o.word_bytes = cfg.word_bytes;
    o.line_words = cfg.memory.line_bytes / cfg.word_bytes;
    o.ifmap_lines = std::uint64_t{cfg.ifmap_sram_kb} * 1024 / cfg.memory.line_bytes;
    o.filter_lines = std::uint64_t{cfg.filter_sram_kb} * 1024 / cfg.memory.line_bytes;
    o.ofmap_lines = std::uint64_t{cfg.ofmap_sram_kb} * 1024 / cfg.memory.line_bytes;
    o.row_coalescing = cfg.memory.row_coalescing;
    o.coalesce_row_words = std::max<std::uint64_t>(1, cfg.dram.row_size_bytes / cfg.word_bytes);
    return o;
}

namespace {

// LRU set of lines; each line remembers the request that filled it.
class LineCache {
public:
    explicit LineCache(std::uint64_t capacity) : cap_(std::max<std::uint64_t>(1, capacity)) {}

    struct Entry {
        std::uint64_t line;
        std::uint32_t request;
        bool dirty;
    };

    Entry* find(std::uint64_t line) {
        auto it = map_.find(line);
        if (it == map_.end()) return nullptr;
        order_.splice(order_.begin(), order_, it->second);
        return &*it->second;
    }

    /// Inserts at MRU; returns the evicted entry, if any.
    std::optional<Entry> insert(Entry e) {
        std::optional<Entry> victim;
        if (map_.size() >= cap_) {
            victim = order_.back();
            map_.erase(victim->line);
            order_.pop_back();
        }
        order_.push_front(e);
        map_[e.line] = order_.begin();
        return victim;
    }

    /// Entries from least to most recently used.
    std::vector<Entry> drain() {
        std::vector<Entry> out(order_.rbegin(), order_.rend());
        order_.clear();
        map_.clear();
        return out;
    }

private:
    std::uint64_t cap_;
    std::list<Entry> order_;
    std::unordered_map<std::uint64_t, std::list<Entry>::iterator> map_;
};

struct MetadataStream {
    bool enabled = false;
    Address filter_base = 0;
    Address base = 0;
    std::uint64_t bits = 0;
    std::uint64_t word_bits = 8;
    Address of(Address filter_addr) const { return base + (filter_addr - filter_base) * bits / word_bits; }
};

MetadataStream metadata_stream(const TraceSource& trace, const InterleaveOptions& opt) {
    MetadataStream ms;
    auto* dt = dynamic_cast<const DemandTrace*>(&trace);
    if (!opt.charge_metadata || !dt || !dt->sparse()) return ms;
    ms.bits = ceil_log2(dt->sparse()->block);
    if (ms.bits == 0) return ms;
    ms.enabled = true;
    ms.word_bits = 8ull * opt.word_bytes;
    ms.filter_base = dt->bases().filter;
    const std::uint64_t filter_words = dt->region_words(Operand::Filter);
    ms.base = ms.filter_base + filter_words;
    const std::uint64_t words = ceil_div(filter_words * ms.bits, ms.word_bits);
    for (Operand op : {Operand::Ifmap, Operand::Ofmap}) {
        Address b = op == Operand::Ifmap ? dt->bases().ifmap : dt->bases().ofmap;
        std::uint64_t w = dt->region_words(op);
        if (ms.base < b + w && b < ms.base + words)
            throw ConfigError("address-space overflow: filter metadata overlaps the " + std::string(to_string(op)) +
                              " region");
    }
    return ms;
}

std::uint32_t checked_index(std::size_t n) {
    if (n >= std::numeric_limits<std::uint32_t>::max()) throw Error("memory trace exceeds 2^32 requests");
    return static_cast<std::uint32_t>(n);
}

// Order-preserving removal of duplicates.
void dedup_keep_order(std::vector<Address>& v) {
    if (v.size() < 2) return;
    std::vector<std::pair<Address, std::size_t>> tagged;
    tagged.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) tagged.emplace_back(v[i], i);
    std::sort(tagged.begin(), tagged.end());
    tagged.erase(std::unique(tagged.begin(), tagged.end(), [](auto& a, auto& b) { return a.first == b.first; }),
                 tagged.end());
    std::sort(tagged.begin(), tagged.end(), [](auto& a, auto& b) { return a.second < b.second; });
    v.clear();
    for (auto& [a, i] : tagged) v.push_back(a);
}

}  // namespace

MemoryTrace interleave_traces(const TraceSource& trace) { return interleave_traces(trace, InterleaveOptions{}); }

MemoryTrace interleave_traces(const TraceSource& trace, const InterleaveOptions& opt) {
    MemoryTrace mt;
    mt.compute_cycles = trace.length();
    const std::uint64_t line_words = opt.sram_filter ? std::max<std::uint32_t>(1, opt.line_words) : 1;
    mt.bytes_per_request = static_cast<std::uint32_t>(line_words * opt.word_bytes);
    if (!opt.sram_filter && opt.row_coalescing)
        mt.bytes_per_request = static_cast<std::uint32_t>(opt.coalesce_row_words * opt.word_bytes);
    mt.dep_offsets.reserve(mt.compute_cycles + 1);
    mt.write_offsets.reserve(mt.compute_cycles + 1);
    mt.dep_offsets.push_back(0);
    mt.write_offsets.push_back(0);

    const auto meta = metadata_stream(trace, opt);
    std::uint32_t max_w = 0;
    for (Operand op : kOperands) max_w = std::max(max_w, trace.width(op));
    std::vector<Address> row(max_w);
    std::vector<Address> keys;

    std::array<LineCache, 3> caches{LineCache(opt.ifmap_lines), LineCache(opt.filter_lines),
                                    LineCache(opt.ofmap_lines)};

    auto add_request = [&](Cycle c, Address a, RequestKind k, Operand op) {
        auto id = checked_index(mt.requests.size());
        mt.requests.push_back(MemoryRequest{c, a, k, op, 0});
        return id;
    };

    for (Cycle c = 0; c < mt.compute_cycles; ++c) {
        for (Operand op : kOperands) {
            const std::uint32_t w = trace.width(op);
            std::span<Address> r(row.data(), w);
            trace.fill_row(op, c, r);
            keys.clear();
            for (Address a : r)
                if (a != kBubble) keys.push_back(a);
            if (op == Operand::Filter && meta.enabled) {
                const std::size_t n = keys.size();
                for (std::size_t i = 0; i < n; ++i) keys.push_back(meta.of(keys[i]));
            }
            const bool is_write = op == Operand::Ofmap;
            if (!opt.sram_filter) {
                if (opt.row_coalescing)
                    for (auto& a : keys) a = a / opt.coalesce_row_words * opt.coalesce_row_words;
                dedup_keep_order(keys);
                for (Address a : keys) {
                    auto id = add_request(c, a, is_write ? RequestKind::Write : RequestKind::Read, op);
                    (is_write ? mt.writes : mt.deps).push_back(id);
                }
                continue;
            }
            for (auto& a : keys) a /= line_words;
            dedup_keep_order(keys);
            auto& cache = caches[static_cast<int>(op)];
            for (Address line : keys) {
                if (auto* e = cache.find(line)) {
                    if (is_write) e->dirty = true;
                    else mt.deps.push_back(e->request);
                    continue;
                }
                std::uint32_t id = 0;
                if (!is_write) {
                    id = add_request(c, line * line_words, RequestKind::Read, op);
                    mt.deps.push_back(id);
                }
                auto victim = cache.insert({line, id, is_write});
                if (victim && victim->dirty)
                    mt.writes.push_back(add_request(c, victim->line * line_words, RequestKind::Write, op));
            }
        }
        if (opt.sram_filter && c + 1 == mt.compute_cycles)
            for (auto& e : caches[static_cast<int>(Operand::Ofmap)].drain())
                if (e.dirty) mt.writes.push_back(add_request(c, e.line * line_words, RequestKind::Write, Operand::Ofmap));
        mt.dep_offsets.push_back(mt.deps.size());
        mt.write_offsets.push_back(mt.writes.size());
    }
    return mt;
}

DramCoord map_address(std::uint64_t byte_addr, const DramConfig& cfg) {
    const std::uint64_t total = cfg.capacity_per_channel * cfg.channels;
    if (byte_addr >= total)
        throw Error("address " + std::to_string(byte_addr) + " outside DRAM capacity of " + std::to_string(total) +
                    " bytes");
    DramCoord d{};
    d.column = byte_addr % cfg.row_size_bytes;
    std::uint64_t rest = byte_addr / cfg.row_size_bytes;
    switch (cfg.address_map) {
        case AddressMap::RoBaChCo:
            d.channel = rest % cfg.channels;
            rest /= cfg.channels;
            d.bank = rest % cfg.banks_per_channel;
            d.row = rest / cfg.banks_per_channel;
            break;
        case AddressMap::ChRoBaCo: {
            const std::uint64_t rows_per_bank = cfg.capacity_per_channel / (cfg.row_size_bytes * cfg.banks_per_channel);
            d.bank = rest % cfg.banks_per_channel;
            rest /= cfg.banks_per_channel;
            d.row = rest % rows_per_bank;
            d.channel = rest / rows_per_bank;
            break;
        }
    }
    return d;
}

DramModel::DramModel(const DramConfig& cfg, std::uint32_t bytes_per_request)
    : cfg_(cfg), bytes_per_request_(bytes_per_request), chans_(cfg.channels) {
    for (auto& ch : chans_) ch.banks.resize(cfg.banks_per_channel);
}

Cycle DramModel::access(Cycle arrival, std::uint64_t byte_addr, RequestKind kind) {
    if (arrival < prev_arrival_) throw Error("DRAM requests must be sorted by arrival cycle");
    prev_arrival_ = arrival;
    const auto& tm = cfg_.timings;
    auto d = map_address(byte_addr, cfg_);
    auto& ch = chans_[d.channel];
    auto& bank = ch.banks[d.bank];

    // Hits to the open row pipeline at burst spacing; a row change waits for
    // the previous transaction to finish.
    const bool hit = bank.open_row == d.row;
    const Cycle start = std::max(arrival, hit ? bank.cas_ready : bank.done);
    Cycle cas = start;
    if (hit) {
        ++ch.row_hits;
    } else {
        ++ch.row_misses;
        cas += tm.tRCD;
        if (bank.open_row != kClosed) {
            cas += tm.tRP;
            ++ch.row_conflicts;
        }
    }
    // Data returns over the shared channel bus during the final tBurst cycles.
    const Cycle data_start = std::max(cas + tm.tCL, ch.bus_free);
    const Cycle done = data_start + tm.tBurst;
    ch.bus_free = done;
    bank.cas_ready = data_start - tm.tCL + tm.tBurst;
    bank.done = std::max(bank.done, done);
    bank.open_row = d.row;

    (kind == RequestKind::Read ? ch.reads : ch.writes) += 1;
    ch.first = std::min(ch.first, arrival);
    ch.last = std::max(ch.last, done);
    ch.latency_sum += static_cast<double>(done - arrival);
    return done;
}

DramStats DramModel::stats() const {
    DramStats st;
    st.channels.resize(chans_.size());
    double lat_sum = 0;
    std::uint64_t n = 0;
    Cycle first = std::numeric_limits<Cycle>::max(), last = 0;
    for (std::size_t c = 0; c < chans_.size(); ++c) {
        const auto& ch = chans_[c];
        auto& cs = st.channels[c];
        cs.reads = ch.reads;
        cs.writes = ch.writes;
        cs.row_hits = ch.row_hits;
        cs.row_misses = ch.row_misses;
        cs.row_conflicts = ch.row_conflicts;
        st.total_reads += ch.reads;
        st.total_writes += ch.writes;
        st.row_hits += ch.row_hits;
        st.row_misses += ch.row_misses;
        st.row_conflicts += ch.row_conflicts;
        lat_sum += ch.latency_sum;
        const std::uint64_t cn = ch.reads + ch.writes;
        n += cn;
        if (cn) {
            cs.avg_latency = ch.latency_sum / static_cast<double>(cn);
            const Cycle span = ch.last - ch.first;
            cs.throughput_mbps =
                static_cast<double>(cn * bytes_per_request_) / (static_cast<double>(span) / cfg_.freq_mhz);
            first = std::min(first, ch.first);
            last = std::max(last, ch.last);
        }
    }
    if (n) {
        st.avg_latency = lat_sum / static_cast<double>(n);
        st.span_cycles = last - first;
        st.bytes = n * std::uint64_t{bytes_per_request_};
        st.throughput_mbps = static_cast<double>(st.bytes) / (static_cast<double>(st.span_cycles) / cfg_.freq_mhz);
    }
    return st;
}

DramResult dram_simulate(const std::vector<DramRequest>& reqs, const DramConfig& cfg,
                         std::uint32_t bytes_per_request) {
    DramModel model(cfg, bytes_per_request);
    DramResult res;
    res.latencies.resize(reqs.size());
    for (std::size_t i = 0; i < reqs.size(); ++i)
        res.latencies[i] = model.access(reqs[i].arrival, reqs[i].byte_addr, reqs[i].kind) - reqs[i].arrival;
    res.stats = model.stats();
    return res;
}

std::vector<DramRequest> to_dram_requests(const MemoryTrace& mt, const SimConfig& cfg) {
    std::vector<DramRequest> out;
    out.reserve(mt.requests.size());
    for (const auto& r : mt.requests) {
        auto arrival = static_cast<Cycle>(std::floor(static_cast<double>(r.request_cycle) / cfg.memory.clock_ratio));
        out.push_back(DramRequest{arrival, r.address * cfg.word_bytes, r.kind});
    }
    return out;
}

std::vector<Cycle> to_accelerator_cycles(const std::vector<Cycle>& lat, double ratio) {
    std::vector<Cycle> out(lat.size());
    for (std::size_t i = 0; i < lat.size(); ++i)
        out[i] = ratio == 1.0 ? lat[i] : static_cast<Cycle>(std::ceil(static_cast<double>(lat[i]) * ratio));
    return out;
}

void write_request_trace(const MemoryTrace& mt, std::ostream& out) {
    out << "request_cycle,address,kind\n";
    for (const auto& r : mt.requests)
        out << r.request_cycle << ',' << r.address << ',' << (r.kind == RequestKind::Read ? 'R' : 'W') << '\n';
}

std::vector<Cycle> parse_latencies(std::string_view content, std::size_t expected) {
    auto records = text::read_csv(content);
    std::vector<Cycle> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (i == 0 && !rec.cells.empty() && text::lower(rec.cells[0]) == "request_index") continue;
        if (rec.cells.size() != 2) throw ParseError("expected request_index,latency_cycles", rec.line);
        auto idx = text::parse_u64(rec.cells[0], rec.line, "request_index");
        if (idx != out.size())
            throw ParseError("request_index " + std::to_string(idx) + " out of order, expected " +
                                 std::to_string(out.size()),
                             rec.line);
        out.push_back(text::parse_u64(rec.cells[1], rec.line, "latency_cycles"));
    }
    if (out.size() != expected)
        throw ValidationError("latency file has " + std::to_string(out.size()) + " rows but the trace has " +
                              std::to_string(expected) + " requests");
    return out;
}

std::vector<Cycle> import_latencies(const std::filesystem::path& path, std::size_t expected) {
    return parse_latencies(read_text_file(path), expected);
}

namespace {

// `issue(id, t)` returns the accelerator cycle at which request `id`, issued
// at cycle t, completes. Issue times never decrease.
template <typename Issue>
StallReport replay(const MemoryTrace& mt, const QueueLimits& q, Issue&& issue) {
    if (q.read_capacity < 1 || q.write_capacity < 1) throw ValidationError("queue capacities must be >= 1");
    constexpr Cycle kNever = std::numeric_limits<Cycle>::max();
    using MinHeap = std::priority_queue<Cycle, std::vector<Cycle>, std::greater<>>;

    std::vector<Cycle> done(mt.requests.size(), kNever);
    std::vector<std::uint32_t> read_order;
    read_order.reserve(mt.reads());
    for (std::size_t i = 0; i < mt.requests.size(); ++i)
        if (mt.requests[i].kind == RequestKind::Read) read_order.push_back(static_cast<std::uint32_t>(i));

    MinHeap rq, wq;
    std::size_t next_read = 0;
    Cycle t = 0, stalls = 0;
    std::uint64_t dep = 0, wr = 0;
    for (Cycle c = 0; c < mt.compute_cycles;) {
        const std::uint64_t dep_end = mt.dep_offsets[c + 1];
        const std::uint64_t wr_end = mt.write_offsets[c + 1];
        for (bool progress = true; progress;) {
            progress = false;
            while (!rq.empty() && rq.top() <= t) rq.pop(), progress = true;
            while (!wq.empty() && wq.top() <= t) wq.pop(), progress = true;
            // Writes of the current cycle go first; reads are then issued in
            // trace order as far ahead as the queue allows.
            while (wr < wr_end && wq.size() < q.write_capacity) {
                auto id = mt.writes[wr++];
                // A write leaves the queue once the controller accepts it.
                done[id] = std::min<Cycle>(issue(id, t), t + 1);
                wq.push(done[id]);
                progress = true;
            }
            while (next_read < read_order.size() && rq.size() < q.read_capacity) {
                auto id = read_order[next_read++];
                done[id] = issue(id, t);
                rq.push(done[id]);
                progress = true;
            }
        }
        while (dep < dep_end && done[mt.deps[dep]] <= t) ++dep;
        if (dep == dep_end && wr == wr_end) {
            ++c;
            ++t;
            continue;
        }
        Cycle next = kNever;
        if (!rq.empty()) next = std::min(next, rq.top());
        if (!wq.empty()) next = std::min(next, wq.top());
        if (next == kNever || next <= t) throw Error("replay made no progress");
        stalls += next - t;
        t = next;
    }
    StallReport rep;
    rep.compute_cycles = mt.compute_cycles;
    rep.stall_cycles = stalls;
    rep.total_cycles = mt.compute_cycles + stalls;
    rep.stall_fraction = rep.total_cycles ? static_cast<double>(stalls) / static_cast<double>(rep.total_cycles) : 0.0;
    return rep;
}

}  // namespace

StallReport replay_with_stalls(const MemoryTrace& mt, const std::vector<Cycle>& lat, const QueueLimits& q) {
    if (lat.size() != mt.requests.size())
        throw ValidationError("latency count " + std::to_string(lat.size()) + " does not match " +
                              std::to_string(mt.requests.size()) + " requests");
    return replay(mt, q, [&](std::uint32_t id, Cycle t) { return t + lat[id]; });
}

StallReport replay_closed_loop(const MemoryTrace& mt, DramModel& dram, const QueueLimits& q, std::uint32_t word_bytes,
                               double clock_ratio) {
    // The DRAM sees requests in trace order whatever the queue sizes, so a
    // write is timed once a later read overtakes it or at the end of the run.
    constexpr Cycle kUnknown = std::numeric_limits<Cycle>::max();
    std::vector<Cycle> produced(mt.requests.size(), kUnknown);
    std::size_t next = 0;  // first request not yet seen by the DRAM
    Cycle last = 0;
    auto to_dram = [&](Cycle t) { return static_cast<Cycle>(std::floor(static_cast<double>(t) / clock_ratio)); };
    auto send = [&](std::size_t id, Cycle t) {
        const auto& r = mt.requests[id];
        last = std::max(last, t);
        const Cycle arrival = to_dram(last);
        return std::pair{arrival, dram.access(arrival, r.address * word_bytes, r.kind)};
    };
    auto rep = replay(mt, q, [&](std::uint32_t id, Cycle t) -> Cycle {
        if (mt.requests[id].kind == RequestKind::Write) {
            produced[id] = t;
            return t + 1;
        }
        for (; next < id; ++next) send(next, std::min(produced[next], t));
        ++next;
        auto [arrival, done] = send(id, t);
        const Cycle lat = done - arrival;
        return t + (clock_ratio == 1.0 ? lat : static_cast<Cycle>(std::ceil(static_cast<double>(lat) * clock_ratio)));
    });
    for (; next < mt.requests.size(); ++next) send(next, produced[next] == kUnknown ? last : produced[next]);
    return rep;
}

MemoryStageResult run_memory_stage(const TraceSource& trace, const SimConfig& cfg, const std::vector<Cycle>* imported) {
    auto mt = interleave_traces(trace, interleave_options(cfg));
    return run_memory_stage(mt, cfg, imported);
}

MemoryStageResult run_memory_stage(const MemoryTrace& mt, const SimConfig& cfg, const std::vector<Cycle>* imported) {
    MemoryStageResult res;
    res.requests = mt.requests.size();
    const QueueLimits q{cfg.queues.read_entries, cfg.queues.write_entries};
    if (imported) {
        if (imported->size() != mt.requests.size())
            throw ValidationError("latency file has " + std::to_string(imported->size()) +
                                  " rows but the trace has " + std::to_string(mt.requests.size()) + " requests");
        res.stalls = replay_with_stalls(mt, to_accelerator_cycles(*imported, cfg.memory.clock_ratio), q);
    } else {
        DramModel dram(cfg.dram, mt.bytes_per_request);
        res.stalls = replay_closed_loop(mt, dram, q, cfg.word_bytes, cfg.memory.clock_ratio);
        res.dram = dram.stats();
    }
    return res;
}

std::vector<ChannelSweepRow> channel_sweep(const MemoryTrace& mt, const SimConfig& cfg,
                                           const std::vector<std::uint32_t>& channels) {
    std::vector<ChannelSweepRow> out;
    for (auto ch : channels) {
        SimConfig c = cfg;
        c.dram.channels = ch;
        auto res = run_memory_stage(mt, c);
        out.push_back({ch, res.dram.throughput_mbps, res.stalls.total_cycles});
    }
    return out;
}

std::string stall_report_header() { return "Layer,ComputeCycles,StallCycles,TotalCycles,StallFraction\n"; }

std::string stall_report_line(const std::string& layer, const StallReport& r) {
    return text::csv_line({layer, std::to_string(r.compute_cycles), std::to_string(r.stall_cycles),
                           std::to_string(r.total_cycles), text::fmt_ratio(r.stall_fraction)});
}

}  // namespace arraysim
