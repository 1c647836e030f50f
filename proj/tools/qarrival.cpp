// Batch front door: one subcommand per pipeline, flat-key config files in,
// CSV/JSON tables out. Exit codes: 0 all verdicts pass, 1 tolerance failure,
// 2 config error, 3 numerical error.

#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "qarrival/runner.hpp"

namespace {

using namespace qarrival;

int finish(const ResultBundle& bundle, const std::string& out_dir, OutputFormat format) {
    bundle.write(out_dir, format);
    for (const auto& [k, v] : bundle.summary)
        std::printf("%s: %s\n", k.c_str(), v.c_str());
    std::printf("verdicts: %s\n", bundle.verdicts_ok ? "pass" : "fail");
    return bundle.verdicts_ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"arrival-time distributions for 1D wave packets"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir = "out";
    std::string format_name = "csv";
    std::uint64_t seed = 0;

    app.add_option("--config", config_path, "experiment config file")->required();
    app.add_option("--out", out_dir, "output directory (default: out)");
    app.add_option("--format", format_name, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--seed", seed, "seed for randomized pipelines");

    auto* free_cmd = app.add_subcommand("free", "free-particle arrival distributions");
    auto* barrier_cmd = app.add_subcommand("barrier", "transmission through a potential");
    auto* compare_cmd = app.add_subcommand("compare", "amplitude means vs the flux oracle");
    auto* uncertainty_cmd = app.add_subcommand("uncertainty", "time-energy product ensemble");
    auto* validate_cmd = app.add_subcommand("validate", "parse and validate the config only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const OutputFormat format = format_name == "json" ? OutputFormat::json : OutputFormat::csv;

    try {
        const ExperimentConfig config = ExperimentConfig::parse_file(config_path);
        if (validate_cmd->parsed()) {
            // Accept the config if it suits at least one pipeline.
            std::string last_error;
            for (RunMode mode : {RunMode::free_run, RunMode::barrier, RunMode::compare,
                                 RunMode::uncertainty}) {
                try {
                    config.validate(mode);
                    std::printf("config ok\n");
                    return 0;
                } catch (const ConfigInvalid& e) {
                    last_error = e.what();
                }
            }
            std::fprintf(stderr, "config error: %s\n", last_error.c_str());
            return 2;
        }
        if (free_cmd->parsed()) return finish(run_free(config), out_dir, format);
        if (barrier_cmd->parsed()) return finish(run_barrier(config), out_dir, format);
        if (compare_cmd->parsed()) return finish(run_compare(config), out_dir, format);
        if (uncertainty_cmd->parsed())
            return finish(run_uncertainty(config, seed), out_dir, format);
        std::fprintf(stderr, "no subcommand\n");
        return 2;
    } catch (const ConfigInvalid& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    }
}
