#include <catch_amalgamated.hpp>

#include <random>

#include "arraysim/multicore.hpp"
#include "oracles.hpp"

using namespace arraysim;

namespace {

constexpr PartitionScheme kSchemes[] = {PartitionScheme::Spatial, PartitionScheme::SpatioTemporal1,
                                        PartitionScheme::SpatioTemporal2};

SimConfig grid_cfg(std::uint32_t R, std::uint32_t C, std::uint32_t pr, std::uint32_t pc, PartitionScheme s) {
    SimConfig cfg;
    cfg.array_rows = R;
    cfg.array_cols = C;
    cfg.multicore.num_cores = pr * pc;
    cfg.multicore.pr = pr;
    cfg.multicore.pc = pc;
    cfg.multicore.scheme = s;
    return cfg;
}

}  // namespace

TEST_CASE("degenerate grid equals the single-core formula", "[multicore]") {
    MappedDims d{37, 19, 23, Dataflow::WS};
    for (auto s : kSchemes) CHECK(analytical_partition_cycles(d, 8, 4, 1, 1, s) == analytical_cycles(d, 8, 4));
}

TEST_CASE("scheme formula examples", "[multicore]") {
    MappedDims d{1000, 1000, 1000, Dataflow::WS};
    CHECK(analytical_partition_cycles(d, 8, 8, 4, 4, PartitionScheme::Spatial) == 1046528);
    CHECK(analytical_partition_cycles(d, 8, 8, 4, 4, PartitionScheme::SpatioTemporal1) == 1088000);
}

TEST_CASE("partition splits", "[multicore]") {
    auto plan = partition_workload({4, 6, 5, Dataflow::OS}, PartitionScheme::Spatial, 2, 1);
    REQUIRE(plan.shards.size() == 2);
    CHECK(plan.at(0, 0).dims.sr == 2);
    CHECK(plan.at(1, 0).dims.sr == 2);

    auto st1 = partition_workload({4, 4, 10, Dataflow::WS}, PartitionScheme::SpatioTemporal1, 1, 4);
    std::vector<std::uint64_t> t;
    for (std::uint32_t c = 0; c < 4; ++c) t.push_back(st1.at(0, c).dims.t);
    CHECK(t == std::vector<std::uint64_t>{3, 3, 2, 2});

    CHECK(split_extent(8, 3, {0.5, 0.25, 0.25}) == std::vector<std::uint64_t>{4, 2, 2});
    CHECK(split_extent(10, 4) == std::vector<std::uint64_t>{3, 3, 2, 2});
}

TEST_CASE("weighted splits sum exactly", "[multicore]") {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 200; ++i) {
        std::uint64_t total = 1 + rng() % 1000;
        std::uint32_t parts = 1 + rng() % 9;
        std::vector<double> w;
        for (std::uint32_t p = 0; p < parts; ++p) w.push_back(0.1 + static_cast<double>(rng() % 100));
        auto ext = split_extent(total, parts, w);
        std::uint64_t sum = 0;
        for (auto e : ext) sum += e;
        CHECK(sum == total);
    }
}

TEST_CASE("grid larger than the dimension leaves idle cores", "[multicore]") {
    auto plan = partition_workload({2, 1, 3, Dataflow::OS}, PartitionScheme::Spatial, 4, 1);
    int idle = 0;
    for (const auto& s : plan.shards) {
        idle += s.idle;
        if (!s.idle) CHECK(s.dims.sr == 1);
    }
    CHECK(idle == 2);
}

TEST_CASE("shared L2 footprint", "[multicore]") {
    auto single = l2_footprint(partition_workload({8, 8, 8, Dataflow::OS}, PartitionScheme::Spatial, 1, 1));
    CHECK(single.duplication_avoided_words == 0);

    // OS: M=4 over 2 grid rows, N=20 over 2 grid cols, K=10. Each input shard is 10x10.
    auto fp = l2_footprint(partition_workload({4, 20, 10, Dataflow::OS}, PartitionScheme::Spatial, 2, 2));
    CHECK(fp.l1_input_words == 400);
    CHECK(fp.input_l2_words == 200);
    CHECK(fp.l1_input_words - fp.input_l2_words == 200);

    // WS, ST2: grid rows split N, grid cols split M. Weight shard per col is 5x10 = 50 words.
    auto w = l2_footprint(partition_workload({10, 10, 8, Dataflow::WS}, PartitionScheme::SpatioTemporal2, 4, 2));
    CHECK(w.l1_weight_words - w.weight_l2_words == 3 * (50 * 2));
}

TEST_CASE("L2 footprint never exceeds the L1 sum", "[multicore]") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        MappedDims d{1 + rng() % 60, 1 + rng() % 60, 1 + rng() % 60, static_cast<Dataflow>(rng() % 3)};
        std::uint32_t pr = 1 + rng() % 5, pc = 1 + rng() % 5;
        auto s = kSchemes[rng() % 3];
        auto fp = l2_footprint(partition_workload(d, s, pr, pc));
        CHECK(fp.l2_words() <= fp.l1_words());
        if (pr == 1 && pc == 1) CHECK(fp.l2_words() == fp.l1_words());
        if (s == PartitionScheme::Spatial && pr > 1 && pc > 1 && d.sr >= pr && d.sc >= pc)
            CHECK(fp.l2_words() < fp.l1_words());
    }
}

TEST_CASE("identical cores with even shards", "[multicore]") {
    MappedDims d{32, 32, 20, Dataflow::WS};
    auto cfg = grid_cfg(8, 8, 2, 2, PartitionScheme::Spatial);
    auto res = simulate_multicore(partition_workload(d, cfg), cfg);
    REQUIRE(res.cores.size() == 4);
    for (const auto& c : res.cores) CHECK(c.report.total_cycles == res.aggregate_cycles);
    CHECK(res.aggregate_cycles == oracle::scheme_cycles(PartitionScheme::Spatial, 32, 32, 20, 8, 8, 2, 2));
}

TEST_CASE("heterogeneous cores take the slower one", "[multicore]") {
    MappedDims d{32, 32, 20, Dataflow::WS};
    auto cfg = grid_cfg(8, 8, 1, 2, PartitionScheme::Spatial);
    cfg.multicore.core_profiles = {CoreProfile{8, 8, 0, 0, 0}, CoreProfile{16, 16, 0, 0, 0}};
    auto res = simulate_multicore(partition_workload(d, cfg), cfg);
    auto slow = oracle::eq1(32, 16, 20, 8, 8);
    auto fast = oracle::eq1(32, 16, 20, 16, 16);
    CHECK(res.aggregate_cycles == std::max(slow, fast));
    CHECK(res.critical_core == 0);
}

TEST_CASE("hop latency adds to the aggregate", "[multicore]") {
    // Each shard is (1, 1, 99) on a 1x1 core: 100 cycles of compute.
    MappedDims d{1, 2, 99, Dataflow::WS};
    auto cfg = grid_cfg(1, 1, 1, 2, PartitionScheme::Spatial);
    cfg.multicore.hop_latency = 10;
    cfg.multicore.core_profiles = {CoreProfile{1, 1, 0, 0, 0}, CoreProfile{1, 1, 0, 0, 3}};
    auto res = simulate_multicore(partition_workload(d, cfg), cfg);
    CHECK(res.cores[0].report.total_cycles == 100);
    CHECK(res.cores[1].report.total_cycles == 100);
    CHECK(res.aggregate_cycles == 130);
}

TEST_CASE("empty plan is rejected", "[multicore]") {
    PartitionPlan plan;
    CHECK_THROWS_AS(simulate_multicore(plan, grid_cfg(4, 4, 1, 1, PartitionScheme::Spatial)), ValidationError);
}

TEST_CASE("shard simulation matches the closed form per shard", "[multicore]") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 60; ++i) {
        MappedDims d{1 + rng() % 50, 1 + rng() % 50, 1 + rng() % 50, static_cast<Dataflow>(rng() % 3)};
        std::uint32_t R = 1 + rng() % 6, C = 1 + rng() % 6, pr = 1 + rng() % 3, pc = 1 + rng() % 3;
        auto s = kSchemes[rng() % 3];
        auto cfg = grid_cfg(R, C, pr, pc, s);
        auto plan = partition_workload(d, cfg);
        auto res = simulate_multicore(plan, cfg);
        for (std::size_t c = 0; c < plan.shards.size(); ++c) {
            const auto& sh = plan.shards[c];
            if (sh.idle) continue;
            CHECK(res.cores[c].report.total_cycles == oracle::eq1(sh.dims.sr, sh.dims.sc, sh.dims.t, R, C));
        }
    }
}

TEST_CASE("divisible shapes reach the scheme formula exactly", "[multicore]") {
    for (auto s : kSchemes)
        for (std::uint32_t pr : {1u, 2u, 4u})
            for (std::uint32_t pc : {1u, 2u, 4u}) {
                const std::uint32_t R = 4, C = 4;
                MappedDims d{pr * R * 2, pc * C * 2, 8 * pr * pc, Dataflow::WS};
                auto cfg = grid_cfg(R, C, pr, pc, s);
                auto res = simulate_multicore(partition_workload(d, cfg), cfg);
                CHECK(res.aggregate_cycles == oracle::scheme_cycles(s, d.sr, d.sc, d.t, R, C, pr, pc));
            }
}

TEST_CASE("cycles are non-increasing in Pr and Pc", "[multicore]") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 40; ++i) {
        MappedDims d{1 + rng() % 300, 1 + rng() % 300, 1 + rng() % 300, Dataflow::WS};
        std::uint64_t R = 1 + rng() % 16, C = 1 + rng() % 16;
        for (auto s : kSchemes)
            for (std::uint32_t pr = 1; pr <= 6; ++pr)
                for (std::uint32_t pc = 1; pc <= 6; ++pc) {
                    auto here = analytical_partition_cycles(d, R, C, pr, pc, s);
                    CHECK(analytical_partition_cycles(d, R, C, pr + 1, pc, s) <= here);
                    CHECK(analytical_partition_cycles(d, R, C, pr, pc + 1, s) <= here);
                }
    }
    // Simulated per-core maximum follows the same direction.
    MappedDims d{23, 17, 29, Dataflow::OS};
    for (auto s : kSchemes)
        for (std::uint32_t p = 1; p < 5; ++p) {
            auto a = simulate_multicore(partition_workload(d, s, p, 1), grid_cfg(4, 4, p, 1, s));
            auto b = simulate_multicore(partition_workload(d, s, p + 1, 1), grid_cfg(4, 4, p + 1, 1, s));
            CHECK(b.aggregate_cycles <= a.aggregate_cycles);
        }
}

TEST_CASE("partition sweep enumeration", "[multicore]") {
    CHECK(sweep_partitions({10, 10, 10, Dataflow::WS}, 4, 4, 4).rows.size() == 9);

    auto sweep = sweep_partitions({1000, 1000, 1000, Dataflow::WS}, 8, 8, 16);
    REQUIRE(sweep.rows.size() == 15);
    Cycle best = ~Cycle{0};
    for (const auto& r : sweep.rows) best = std::min(best, r.cycles);
    CHECK(sweep.rows[sweep.compute_optimal].cycles == best);
    std::uint64_t least = ~std::uint64_t{0};
    for (const auto& r : sweep.rows) least = std::min(least, r.footprint.l1_words());
    CHECK(sweep.rows[sweep.footprint_optimal].footprint.l1_words() == least);

    auto unit = sweep_partitions({1, 1, 1, Dataflow::WS}, 4, 4, 4);
    for (const auto& r : unit.rows) CHECK(r.cycles == unit.rows[0].cycles);
    CHECK(unit.rows[unit.compute_optimal].scheme == PartitionScheme::Spatial);
    CHECK(unit.rows[unit.compute_optimal].pr == 1);

    CHECK_THROWS_AS(sweep_partitions({1, 1, 1, Dataflow::WS}, 4, 4, 0), ValidationError);
}

TEST_CASE("sweep csv marks the picks", "[multicore]") {
    auto csv = sweep_csv(sweep_partitions({100, 100, 100, Dataflow::WS}, 8, 8, 4));
    CHECK(csv.rfind("scheme,Pr,Pc,cycles,", 0) == 0);
    CHECK(csv.find("compute") != std::string::npos);
    CHECK(csv.find("footprint\n") != std::string::npos);
}
