#include <catch_amalgamated.hpp>

#include <random>

#include "arraysim/memory.hpp"
#include "oracles.hpp"

using namespace arraysim;

namespace {

using Rows = std::vector<std::vector<Address>>;

ExplicitTrace explicit_trace(Rows ifmap, Rows filter = {}, Rows ofmap = {}) {
    return ExplicitTrace({std::move(ifmap), std::move(filter), std::move(ofmap)});
}

SimConfig mem_cfg(std::uint32_t R, std::uint32_t C, Dataflow df) {
    SimConfig cfg;
    cfg.array_rows = R;
    cfg.array_cols = C;
    cfg.dataflow = df;
    return cfg;
}

constexpr std::uint64_t kRow = 8192;
constexpr std::uint64_t kBankStride = kRow;       // next bank, same row
constexpr std::uint64_t kRowStride = kRow * 16;   // same bank, next row

}  // namespace

TEST_CASE("interleave examples", "[memory]") {
    auto one = interleave_traces(explicit_trace({{7}}));
    REQUIRE(one.requests.size() == 1);
    CHECK(one.requests[0].kind == RequestKind::Read);
    CHECK(one.requests[0].address == 7);

    Rows idle(5);
    auto ifm = idle, fil = idle;
    ifm.push_back({3});
    fil.push_back({10'000'000});
    auto two = interleave_traces(explicit_trace(ifm, fil));
    REQUIRE(two.requests.size() == 2);
    CHECK(two.requests[0].request_cycle == 5);
    CHECK(two.requests[0].op == Operand::Ifmap);
    CHECK(two.requests[1].op == Operand::Filter);

    auto dup = interleave_traces(explicit_trace({{4, 4}}));
    CHECK(dup.requests.size() == 1);
}

TEST_CASE("interleave dedup matches a set count per cycle", "[memory]") {
    std::mt19937_64 rng(31);
    Rows in(40), out(40);
    std::uint64_t expect = 0;
    for (std::size_t c = 0; c < in.size(); ++c) {
        std::set<Address> r, w;
        for (int j = 0; j < 6; ++j) {
            in[c].push_back(rng() % 10);
            r.insert(in[c].back());
            out[c].push_back(20'000'000 + rng() % 10);
            w.insert(out[c].back());
        }
        expect += r.size() + w.size();
    }
    auto mt = interleave_traces(explicit_trace(in, {}, out));
    CHECK(mt.requests.size() == expect);
    CHECK(mt.reads() + mt.write_count() == expect);
}

TEST_CASE("DRAM row state examples", "[memory]") {
    DramConfig cfg;
    const auto& t = cfg.timings;

    auto cold = dram_simulate({{0, 0, RequestKind::Read}}, cfg);
    CHECK(cold.latencies[0] == t.tRCD + t.tCL + t.tBurst);

    auto hit = dram_simulate({{0, 0, RequestKind::Read}, {100, 64, RequestKind::Read}}, cfg);
    CHECK(hit.latencies[1] == t.tCL + t.tBurst);
    CHECK(hit.stats.row_hits == 1);

    REQUIRE(map_address(kRowStride, cfg).bank == map_address(0, cfg).bank);
    REQUIRE(map_address(kRowStride, cfg).row != map_address(0, cfg).row);
    auto conflict = dram_simulate({{0, 0, RequestKind::Read}, {0, kRowStride, RequestKind::Read}}, cfg);
    const Cycle first = t.tRCD + t.tCL + t.tBurst;
    CHECK(conflict.latencies[1] == first + t.tRP + t.tRCD + t.tCL + t.tBurst);
    CHECK(conflict.stats.row_conflicts == 1);

    CHECK_THROWS(dram_simulate({{0, cfg.capacity_per_channel, RequestKind::Read}}, cfg));
}

TEST_CASE("independent banks overlap", "[memory]") {
    DramConfig cfg;
    auto r = dram_simulate({{0, 0, RequestKind::Read}, {0, kBankStride, RequestKind::Read}}, cfg);
    const Cycle cold = cfg.timings.tRCD + cfg.timings.tCL + cfg.timings.tBurst;
    // Only the shared data bus separates them.
    CHECK(r.latencies[1] == cold + cfg.timings.tBurst);
}

TEST_CASE("latency sandwich", "[memory]") {
    DramConfig cfg;
    const auto& t = cfg.timings;
    std::mt19937_64 rng(12);
    std::vector<DramRequest> reqs;
    Cycle at = 0;
    for (int i = 0; i < 2000; ++i) {
        at += rng() % 6;
        reqs.push_back({at, (rng() % 4096) * 64, rng() % 4 ? RequestKind::Read : RequestKind::Write});
    }
    auto r = dram_simulate(reqs, cfg);
    for (auto l : r.latencies) CHECK(l >= t.tCL + t.tBurst);
    CHECK(r.stats.total_reads + r.stats.total_writes == reqs.size());
    CHECK(r.stats.row_hits + r.stats.row_misses == reqs.size());

    // Pair runs: the probe hits the open row in one and is forced to miss in the other.
    for (int i = 0; i < 200; ++i) {
        Cycle gap = rng() % 80;
        std::uint64_t col = (rng() % 128) * 64;
        auto h = dram_simulate({{0, 0, RequestKind::Read}, {gap, col, RequestKind::Read}}, cfg);
        auto m = dram_simulate({{0, kRowStride, RequestKind::Read}, {gap, col, RequestKind::Read}}, cfg);
        CHECK(h.latencies[1] <= m.latencies[1]);
    }
}

TEST_CASE("latency import", "[memory]") {
    CHECK(parse_latencies("request_index,latency_cycles\n0,5\n1,6\n2,7\n", 3) == std::vector<Cycle>{5, 6, 7});
    try {
        parse_latencies("0,5\n1,6\n", 3);
        FAIL("expected a count mismatch");
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        CHECK(msg.find('2') != std::string::npos);
        CHECK(msg.find('3') != std::string::npos);
    }
    CHECK_THROWS_AS(import_latencies("/nonexistent/latencies.csv", 1), Error);
}

TEST_CASE("zero latency reproduces compute cycles", "[memory]") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
        auto df = static_cast<Dataflow>(rng() % 3);
        auto cfg = mem_cfg(1 + rng() % 8, 1 + rng() % 8, df);
        auto dims = map_gemm(GemmOp{1 + rng() % 30, 1 + rng() % 30, 1 + rng() % 30, ""}, df);
        auto trace = generate_demand_trace(dims, cfg);
        auto mt = interleave_traces(trace, interleave_options(cfg));
        std::vector<Cycle> zeros(mt.requests.size(), 0);
        for (std::uint64_t q : {1u, 4u, 1000000u}) {
            auto s = replay_with_stalls(mt, zeros, QueueLimits{q, q});
            CHECK(s.stall_cycles == 0);
            CHECK(s.total_cycles == trace.length());
        }
        auto staged = run_memory_stage(mt, cfg, &zeros);
        CHECK(staged.stalls.total_cycles == trace.length());
    }
}

TEST_CASE("a single-entry queue serializes reads", "[memory]") {
    auto mt = interleave_traces(explicit_trace({{1, 2}}));
    REQUIRE(mt.requests.size() == 2);
    auto s = replay_with_stalls(mt, {10, 10}, QueueLimits{1, 1});
    CHECK(s.stall_cycles >= 10);
    CHECK(s.total_cycles == mt.compute_cycles + s.stall_cycles);
    auto wide = replay_with_stalls(mt, {10, 10}, QueueLimits{2, 2});
    CHECK(wide.total_cycles < s.total_cycles);
}

TEST_CASE("bigger queues never cost cycles", "[memory]") {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 12; ++i) {
        auto cfg = mem_cfg(4 + rng() % 12, 4 + rng() % 12, static_cast<Dataflow>(rng() % 3));
        cfg.memory.sram_filter = rng() % 2;
        auto dims = map_gemm(GemmOp{8 + rng() % 64, 8 + rng() % 64, 8 + rng() % 64, ""}, cfg.dataflow);
        auto mt = interleave_traces(generate_demand_trace(dims, cfg), interleave_options(cfg));
        Cycle prev = ~Cycle{0};
        for (std::uint32_t q : {1u, 2u, 8u, 32u, 128u, 512u}) {
            cfg.queues.read_entries = cfg.queues.write_entries = q;
            auto r = run_memory_stage(mt, cfg);
            CHECK(r.stalls.total_cycles <= prev);
            CHECK(r.stalls.total_cycles >= mt.compute_cycles);
            CHECK(r.dram.total_reads + r.dram.total_writes == mt.requests.size());
            prev = r.stalls.total_cycles;
        }
        // Fixed random latencies follow the same order.
        std::vector<Cycle> lat(mt.requests.size());
        for (auto& l : lat) l = rng() % 50;
        Cycle fixed_prev = ~Cycle{0};
        for (std::uint64_t q : {1u, 3u, 16u, 256u}) {
            auto s = replay_with_stalls(mt, lat, QueueLimits{q, q});
            CHECK(s.total_cycles <= fixed_prev);
            fixed_prev = s.total_cycles;
        }
    }
}

TEST_CASE("channel sweep", "[memory]") {
    auto cfg = mem_cfg(32, 32, Dataflow::WS);
    cfg.memory.sram_filter = false;
    auto dims = map_gemm(GemmOp{64, 256, 288, ""}, Dataflow::WS);
    auto mt = interleave_traces(generate_demand_trace(dims, cfg), interleave_options(cfg));
    auto rows = channel_sweep(mt, cfg);
    REQUIRE(rows.size() == 4);
    CHECK(rows[1].throughput_mbps > rows[0].throughput_mbps);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].throughput_mbps >= rows[i - 1].throughput_mbps);

    auto empty = interleave_traces(explicit_trace(Rows(4)));
    CHECK(empty.requests.empty());
    for (const auto& r : channel_sweep(empty, cfg)) CHECK(r.throughput_mbps == 0.0);
}

TEST_CASE("stall report line", "[memory]") {
    CHECK(stall_report_header() == "Layer,ComputeCycles,StallCycles,TotalCycles,StallFraction\n");
    StallReport r{100, 25, 125, 0.2};
    CHECK(stall_report_line("conv1", r) == "conv1,100,25,125,0.200000\n");
}
