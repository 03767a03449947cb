#include <iostream>

#include "CLI11.hpp"
#include "arraysim/multicore.hpp"
#include "arraysim/pipeline.hpp"

using namespace arraysim;

namespace {

int run_cmd(const RunOptions& opt) {
    auto sum = run_pipeline(opt);
    std::cout << "simulated " << sum.layers << " layer(s); wrote " << sum.files.size() << " file(s) to "
              << opt.out.string() << "\n";
    return 0;
}

int analytical_cmd(std::uint64_t m, std::uint64_t n, std::uint64_t k, std::uint32_t rows, std::uint32_t cols,
                   std::uint32_t cores, const std::string& dataflow) {
    if (cores < 1) throw ValidationError("--cores must be >= 1");
    if (rows < 1 || cols < 1) throw ValidationError("--rows and --cols must be >= 1");
    if (m < 1 || n < 1 || k < 1) throw ValidationError("-M, -N and -K must be >= 1");
    GemmOp op{m, n, k, "gemm"};
    auto dims = map_gemm(op, parse_dataflow(dataflow));
    std::cout << sweep_csv(sweep_partitions(dims, rows, cols, cores));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cycle-accurate systolic array simulator"};
    app.require_subcommand(1);

    RunOptions ro;
    std::string stages = "compute";
    std::string config, topology, out, latency_dir;
    std::uint64_t seed = 0;
    auto* run = app.add_subcommand("run", "Simulate a topology and write reports");
    run->add_option("--config", config, "Configuration file")->required();
    run->add_option("--topology", topology, "Topology CSV")->required();
    run->add_option("--out", out, "Output directory")->required();
    run->add_option("--stages", stages, "compute,memory,layout,energy,sparsity or all");
    run->add_flag("--dump-traces", ro.dump_traces, "Write per-operand demand traces and request traces");
    auto* seed_opt = run->add_option("--seed", seed, "Override the sparsity seed");
    run->add_option("--jobs", ro.jobs, "Worker threads for layer simulation")->check(CLI::Range(1u, 1024u));
    run->add_option("--import-latencies", latency_dir, "Directory of per-request DRAM latency files");

    std::uint64_t m = 0, n = 0, k = 0;
    std::uint32_t rows = 32, cols = 32, cores = 1;
    std::string dataflow = "ws";
    auto* an = app.add_subcommand("analytical", "Partition sweep from closed-form cycle counts");
    an->add_option("-M", m, "Filters / output rows")->required();
    an->add_option("-N", n, "Output columns")->required();
    an->add_option("-K", k, "Reduction length")->required();
    an->add_option("--rows", rows, "Array rows per core");
    an->add_option("--cols", cols, "Array columns per core");
    an->add_option("--cores", cores, "Core count");
    an->add_option("--dataflow", dataflow, "is, ws or os");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run->parsed()) {
            ro.config = config;
            ro.topology = topology;
            ro.out = out;
            ro.stages = parse_stages(stages);
            if (seed_opt->count()) ro.seed = seed;
            if (!latency_dir.empty()) ro.latency_dir = latency_dir;
            return run_cmd(ro);
        }
        return analytical_cmd(m, n, k, rows, cols, cores, dataflow);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
