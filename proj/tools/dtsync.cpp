// dtsync: run one scenario, run a parameter sweep, or run the acceptance
// checks.
//
//   dtsync run    [--config PATH] [--seed U64] [--algo NAME] [--out PATH] [--format csv|json]
//                 [--mode expected|montecarlo] [--trials U32] [--timing]
//   dtsync sweep  SPEC [--config PATH] [--out PATH] [--format csv|json] [--mode ...] [--trials U32] [--timing]
//   dtsync verify [CRITERION...] [--csv DIR]

#include "dtsync/config_io.hpp"
#include "dtsync/harness.hpp"
#include "dtsync/verify.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

using namespace dtsync;

struct OutputFlags {
    std::string out;
    std::string format = "csv";
    std::string mode = "expected";
    unsigned trials = 10000;
    bool timing = false;
};

void add_output_flags(CLI::App* cmd, OutputFlags& f) {
    cmd->add_option("--out", f.out, "Write results here instead of stdout");
    cmd->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--mode", f.mode, "Score delivery by expectation or by Bernoulli sampling")
        ->check(CLI::IsMember({"expected", "montecarlo"}));
    cmd->add_option("--trials", f.trials, "Monte-Carlo trials")->check(CLI::PositiveNumber);
    cmd->add_flag("--timing", f.timing, "Record wall_ms (output is then no longer reproducible)");
}

RunOptions run_options(const OutputFlags& f) {
    RunOptions opt;
    opt.eval.mode = f.mode == "montecarlo" ? DeliveryMode::monte_carlo : DeliveryMode::expected;
    opt.eval.trials = static_cast<int>(f.trials);
    opt.timing = f.timing;
    return opt;
}

ScenarioConfig config_or_default(const std::string& path) {
    return path.empty() ? reference_scenario() : load_config(path);
}

// LF endings on every platform: the stream is binary.
void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Resource allocation for digital-twin synchronisation"};
    app.require_subcommand(1);

    std::string config_path, algo = "proposed", spec_path, csv_dir;
    std::uint64_t seed = 0;
    std::vector<int> criteria;
    OutputFlags run_flags, sweep_flags;

    auto* run = app.add_subcommand("run", "Solve one seeded scenario");
    run->add_option("--config", config_path, "Scenario JSON (reference scenario when absent)")->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Channel seed");
    run->add_option("--algo", algo, "proposed, random, equal_power or single_device")
        ->check(CLI::IsMember(algorithm_names()));
    add_output_flags(run, run_flags);

    auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep file");
    sweep->add_option("spec", spec_path, "Sweep JSON")->required()->check(CLI::ExistingFile);
    sweep->add_option("--config", config_path, "Base scenario JSON")->check(CLI::ExistingFile);
    add_output_flags(sweep, sweep_flags);

    auto* ver = app.add_subcommand("verify", "Run the oracle and property checks");
    ver->add_option("criteria", criteria, "Criterion numbers (all when absent)")->check(CLI::Range(1, 12));
    ver->add_option("--csv", csv_dir, "Directory for each criterion's CSV")->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto cfg = config_or_default(config_path);
            const auto ch = generate_channels(cfg, seed);
            auto opt = run_options(run_flags);
            opt.eval.seed = detail::mix_seed(seed, 0);
            const auto outcome = run_algorithm(algo, cfg, ch, seed, opt);
            const ResultRow row = make_row(seed, "none", 0.0, outcome.result);
            if (run_flags.format == "csv") {
                emit(to_csv({row}), run_flags.out);
            } else {
                json j = {{"config", config_to_json(cfg)}, {"result", to_json(row)}, {"trace", outcome.result.trace}};
                if (outcome.allocation) j["allocation"] = to_json(*outcome.allocation);
                emit(j.dump(2) + "\n", run_flags.out);
            }
            return outcome.result.status == "ok" ? 0 : 2;
        }
        if (*sweep) {
            const auto spec = sweep_from_json(read_json_file(spec_path));
            const auto rows = run_sweep(spec, config_or_default(config_path), run_options(sweep_flags));
            emit(sweep_flags.format == "csv" ? to_csv(rows) : to_json(rows).dump(2) + "\n", sweep_flags.out);
            return 0;
        }
        const auto results = verify::run(criteria, std::cout, csv_dir);
        int failed = 0;
        for (const auto& r : results) failed += !r.pass;
        return failed == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "dtsync: " << e.what() << "\n";
        return 1;
    }
}
