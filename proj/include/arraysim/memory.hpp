#pragma once

// Off-chip memory workflow: turn demand traces into timestamped requests,
// time them against a banked DRAM model (or imported latencies), then replay
// compute with finite request queues.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "arraysim/systolic.hpp"
#include "arraysim/workload.hpp"

namespace arraysim {

enum class RequestKind : std::uint8_t { Read, Write };

struct MemoryRequest {
    Cycle request_cycle = 0;
    Address address = 0;  // word address
    RequestKind kind = RequestKind::Read;
    Operand op = Operand::Ifmap;
    Cycle completion_cycle = 0;  // filled by the timing model
};

/// Requests plus, per compute cycle, the reads it depends on and the writes it emits.
struct MemoryTrace {
    Cycle compute_cycles = 0;
    std::uint32_t bytes_per_request = 1;
    std::vector<MemoryRequest> requests;  // ordered by (cycle, ifmap < filter < ofmap)
    std::vector<std::uint64_t> dep_offsets;  // size compute_cycles + 1
    std::vector<std::uint32_t> deps;         // request indices (reads)
    std::vector<std::uint64_t> write_offsets;
    std::vector<std::uint32_t> writes;       // request indices (writes)

    std::uint64_t reads() const;
    std::uint64_t write_count() const { return writes.size(); }
};

struct InterleaveOptions {
    bool sram_filter = false;  // false: every demanded address per cycle becomes a request
    std::uint32_t line_words = 1;
    std::uint64_t ifmap_lines = 0, filter_lines = 0, ofmap_lines = 0;  // SRAM capacities
    bool row_coalescing = false;
    std::uint64_t coalesce_row_words = 0;
    std::uint32_t word_bytes = 1;
    /// Sparse filters also stream their index metadata through the filter path.
    bool charge_metadata = true;
};

InterleaveOptions interleave_options(const SimConfig& cfg);

/// Raw per-cycle merge with duplicate addresses collapsed.
MemoryTrace interleave_traces(const TraceSource& trace);
MemoryTrace interleave_traces(const TraceSource& trace, const InterleaveOptions& opt);

struct DramChannelStats {
    std::uint64_t reads = 0, writes = 0;
    std::uint64_t row_hits = 0, row_misses = 0, row_conflicts = 0;
    double avg_latency = 0;
    double throughput_mbps = 0;
};

struct DramStats {
    std::uint64_t total_reads = 0, total_writes = 0;
    std::uint64_t row_hits = 0;
    std::uint64_t row_misses = 0;     // includes conflicts and cold opens
    std::uint64_t row_conflicts = 0;  // a different row was open
    double avg_latency = 0;           // DRAM cycles
    double throughput_mbps = 0;
    Cycle span_cycles = 0;
    std::uint64_t bytes = 0;
    std::vector<DramChannelStats> channels;
};

struct DramCoord {
    std::uint64_t channel, bank, row, column;
};

DramCoord map_address(std::uint64_t byte_addr, const DramConfig& cfg);

struct DramResult {
    std::vector<Cycle> latencies;  // DRAM cycles, one per request
    DramStats stats;
};

/// Open-page DRAM timing state. Arrivals are DRAM cycles and must not decrease.
class DramModel {
public:
    DramModel(const DramConfig& cfg, std::uint32_t bytes_per_request = 64);
    /// Returns the completion cycle.
    Cycle access(Cycle arrival, std::uint64_t byte_addr, RequestKind kind);
    DramStats stats() const;

private:
    static constexpr std::uint64_t kClosed = std::numeric_limits<std::uint64_t>::max();
    struct Bank {
        std::uint64_t open_row = kClosed;
        Cycle cas_ready = 0;  // next column command to the open row
        Cycle done = 0;       // last transaction finished
    };
    struct Channel {
        std::vector<Bank> banks;
        Cycle bus_free = 0;
        Cycle first = std::numeric_limits<Cycle>::max(), last = 0;
        double latency_sum = 0;
        std::uint64_t reads = 0, writes = 0;
        std::uint64_t row_hits = 0, row_misses = 0, row_conflicts = 0;
    };
    DramConfig cfg_;
    std::uint32_t bytes_per_request_;
    std::vector<Channel> chans_;
    Cycle prev_arrival_ = 0;
};

/// Requests carry DRAM-cycle arrival times and byte addresses here.
struct DramRequest {
    Cycle arrival = 0;
    std::uint64_t byte_addr = 0;
    RequestKind kind = RequestKind::Read;
};

DramResult dram_simulate(const std::vector<DramRequest>& reqs, const DramConfig& cfg,
                         std::uint32_t bytes_per_request = 64);

/// Converts a memory trace to DRAM arrivals (accelerator cycles / clock ratio).
std::vector<DramRequest> to_dram_requests(const MemoryTrace& mt, const SimConfig& cfg);

/// DRAM cycles to accelerator cycles, rounding up.
std::vector<Cycle> to_accelerator_cycles(const std::vector<Cycle>& dram_latencies, double clock_ratio);

void write_request_trace(const MemoryTrace& mt, std::ostream& out);
std::vector<Cycle> parse_latencies(std::string_view content, std::size_t expected);
std::vector<Cycle> import_latencies(const std::filesystem::path& path, std::size_t expected);

struct StallReport {
    Cycle compute_cycles = 0;
    Cycle stall_cycles = 0;
    Cycle total_cycles = 0;
    double stall_fraction = 0;
};

struct QueueLimits {
    std::uint64_t read_capacity = 128;
    std::uint64_t write_capacity = 128;
};

/// latencies are accelerator cycles, one per request, counted from issue.
StallReport replay_with_stalls(const MemoryTrace& mt, const std::vector<Cycle>& latencies, const QueueLimits& q);

/// Replay that times each request against `dram` at the cycle it is issued.
StallReport replay_closed_loop(const MemoryTrace& mt, DramModel& dram, const QueueLimits& q, std::uint32_t word_bytes,
                               double clock_ratio);

struct MemoryStageResult {
    StallReport stalls;
    DramStats dram;
    std::uint64_t requests = 0;
};

/// Interleave, then replay against the internal DRAM model or fixed `imported` latencies (DRAM cycles).
MemoryStageResult run_memory_stage(const TraceSource& trace, const SimConfig& cfg,
                                   const std::vector<Cycle>* imported = nullptr);
MemoryStageResult run_memory_stage(const MemoryTrace& mt, const SimConfig& cfg,
                                   const std::vector<Cycle>* imported = nullptr);

struct ChannelSweepRow {
    std::uint32_t channels;
    double throughput_mbps;
    Cycle total_cycles;
};

std::vector<ChannelSweepRow> channel_sweep(const MemoryTrace& mt, const SimConfig& cfg,
                                           const std::vector<std::uint32_t>& channels = {1, 2, 4, 8});

/// "Layer,ComputeCycles,StallCycles,TotalCycles,StallFraction"
std::string stall_report_header();
std::string stall_report_line(const std::string& layer, const StallReport& r);

}  // namespace arraysim
