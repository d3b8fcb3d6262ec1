#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "tanglesim/config.hpp"
#include "tanglesim/sim.hpp"
#include "tanglesim/version.hpp"

namespace {

using tanglesim::Json;

struct CommonOpts {
    std::string configPath;
    std::string outPath;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<int> runs;
    int jobs = 1;
};

void add_common_flags(CLI::App* cmd, CommonOpts& opts, bool withRuns = true, bool withJobs = false) {
    cmd->add_option("--config", opts.configPath, "JSON config file")->required();
    cmd->add_option("--out", opts.outPath, "output path (default: stdout)");
    cmd->add_option("--set", opts.overrides, "override a config key, dotted path key=value (repeatable)");
    cmd->add_option("--seed", opts.seed, "override the config seed");
    if (withRuns) cmd->add_option("--runs", opts.runs, "override the number of Monte-Carlo runs");
    if (withJobs) cmd->add_option("--jobs", opts.jobs, "parallel sweep workers")->check(CLI::PositiveNumber);
}

Json load_with_overrides(const CommonOpts& opts) {
    Json j = tanglesim::load_json_file(opts.configPath);
    for (const auto& kv : opts.overrides) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw tanglesim::ParseError("--set expects key=value, got \"" + kv + "\"");
        tanglesim::apply_override(j, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (opts.seed) j["seed"] = *opts.seed;
    if (opts.runs) j["runs"] = *opts.runs;
    return j;
}

void write_output(const std::string& text, const std::string& outPath) {
    if (outPath.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(outPath, std::ios::binary);
    if (!out) throw tanglesim::Error("cannot open output file \"" + outPath + "\"");
    out << text;
}

// Resolved config echoed next to the data for provenance.
void echo_config(const Json& resolved, const std::string& outPath) {
    if (outPath.empty()) return;
    std::ofstream out(outPath + ".config.json", std::ios::binary);
    if (!out) throw tanglesim::Error("cannot open \"" + outPath + ".config.json\"");
    out << resolved.dump(2) << '\n';
}

int cmd_validate(const CommonOpts& opts) {
    Json j = load_with_overrides(opts);
    switch (tanglesim::detect_config_kind(j)) {
        case tanglesim::ConfigKind::Fpc:
            tanglesim::fpc_config_from_json(j);
            std::cerr << "config ok (fpc)\n";
            break;
        case tanglesim::ConfigKind::Scenario:
            tanglesim::scenario_config_from_json(j);
            std::cerr << "config ok (tangle scenario)\n";
            break;
    }
    return 0;
}

int cmd_fpc_run(const CommonOpts& opts) {
    Json j = load_with_overrides(opts);
    tanglesim::FpcExperimentConfig cfg = tanglesim::fpc_config_from_json(j);
    tanglesim::MetricsRow row = tanglesim::run_fpc_experiment(cfg.fpc, cfg.runs, cfg.manaEndowments);
    std::string csv = std::string(tanglesim::kFpcCsvHeader) + "\n" + tanglesim::fpc_csv_row(cfg.fpc, cfg.runs, row) + "\n";
    write_output(csv, opts.outPath);
    echo_config(tanglesim::fpc_config_to_json(cfg), opts.outPath);
    return 0;
}

int cmd_fpc_sweep(const CommonOpts& opts) {
    Json j = load_with_overrides(opts);
    tanglesim::FpcExperimentConfig cfg = tanglesim::fpc_config_from_json(j);
    auto rows = tanglesim::run_fpc_sweep(cfg.fpc, cfg.sweep, cfg.runs, opts.jobs);
    std::string csv = std::string(tanglesim::kFpcCsvHeader) + "\n";
    for (const auto& row : rows) {
        if (!row.feasible)
            std::cerr << "skipping infeasible grid point N=" << row.config.N << " k=" << row.config.k
                      << " q=" << row.config.q << ": " << row.infeasibleReason << '\n';
        csv += tanglesim::fpc_csv_row(row.config, cfg.runs, row.metrics);
        csv += '\n';
    }
    write_output(csv, opts.outPath);
    echo_config(tanglesim::fpc_config_to_json(cfg), opts.outPath);
    return 0;
}

int cmd_tangle_run(const CommonOpts& opts) {
    Json j = load_with_overrides(opts);
    tanglesim::ScenarioConfig cfg = tanglesim::scenario_config_from_json(j);
    std::ofstream traceFile;
    std::ostream* trace = nullptr;
    if (!opts.outPath.empty()) {
        traceFile.open(opts.outPath + ".trace", std::ios::binary);
        if (!traceFile) throw tanglesim::Error("cannot open \"" + opts.outPath + ".trace\"");
        trace = &traceFile;
    }
    tanglesim::ScenarioResult result = tanglesim::run_tangle_scenario(cfg, trace);
    std::string csv = std::string(tanglesim::kTangleCsvHeader) + "\n" + tanglesim::tangle_csv_row(result.metrics) + "\n";
    write_output(csv, opts.outPath);
    echo_config(tanglesim::scenario_config_to_json(cfg), opts.outPath);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"IOTA 2.0 protocol simulator"};
    app.require_subcommand(1);

    CommonOpts validateOpts, fpcRunOpts, fpcSweepOpts, tangleOpts;
    CLI::App* validate = app.add_subcommand("validate-config", "parse and validate a config file");
    add_common_flags(validate, validateOpts);
    CLI::App* fpcRun = app.add_subcommand("fpc-run", "run one FPC experiment and emit a CSV row");
    add_common_flags(fpcRun, fpcRunOpts);
    CLI::App* fpcSweep = app.add_subcommand("fpc-sweep", "run an FPC parameter sweep over N, k, q");
    add_common_flags(fpcSweep, fpcSweepOpts, true, true);
    CLI::App* tangleRun = app.add_subcommand("tangle-run", "run a whole-Tangle scenario");
    add_common_flags(tangleRun, tangleOpts, /*withRuns=*/false);
    CLI::App* version = app.add_subcommand("version", "print the version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (version->parsed()) {
            std::cout << "tanglesim " << tanglesim::kVersion << '\n';
            return 0;
        }
        if (validate->parsed()) return cmd_validate(validateOpts);
        if (fpcRun->parsed()) return cmd_fpc_run(fpcRunOpts);
        if (fpcSweep->parsed()) return cmd_fpc_sweep(fpcSweepOpts);
        if (tangleRun->parsed()) return cmd_tangle_run(tangleOpts);
    } catch (const tanglesim::ParseError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const tanglesim::UnknownKey& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const tanglesim::InvariantViolation& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
