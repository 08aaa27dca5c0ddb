// optcon: check, run and inspect optimal-consensus scenarios.
//
//   optcon check <file>
//   optcon run <file> [--out DIR] [--step H] [--t-end T]
//   optcon oracle <file>
//   optcon scaffold <1|2> <file>
//
// Verbosity comes from OPTCON_LOG (trace, debug, info, warn, error, off).

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "optcon/commands.hpp"

int main(int argc, char** argv) {
    if (const char* lvl = std::getenv("OPTCON_LOG")) {
        spdlog::set_level(spdlog::level::from_str(lvl));
    } else {
        spdlog::set_level(spdlog::level::warn);
    }

    CLI::App app{"Distributed optimal consensus with unknown control directions"};
    app.require_subcommand(1);

    std::string file;
    auto* check = app.add_subcommand("check", "Validate a scenario file");
    check->add_option("file", file, "Scenario JSON")->required();

    optcon::cli::RunOptions run_opt;
    auto* run = app.add_subcommand("run", "Simulate a scenario and write trace, metrics and plot script");
    run->add_option("file", file, "Scenario JSON")->required();
    run->add_option("--out", run_opt.out_dir, "Output directory (default: the file's output.dir)");
    run->add_option("--step", run_opt.step, "Integration step [s]")->check(CLI::PositiveNumber);
    run->add_option("--t-end", run_opt.t_end, "Final time [s]")->check(CLI::PositiveNumber);

    auto* oracle = app.add_subcommand("oracle", "Print the centralized minimizer of the summed costs");
    oracle->add_option("file", file, "Scenario JSON")->required();

    int example = 0;
    auto* scaffold = app.add_subcommand("scaffold", "Write a built-in example scenario");
    scaffold->add_option("example", example, "Example number (1 or 2)")->required();
    scaffold->add_option("file", file, "Destination path")->required();

    CLI11_PARSE(app, argc, argv);

    int rc = 0;
    if (*check) {
        spdlog::debug("checking {}", file);
        rc = optcon::cli::cmd_check(file, std::cout);
    } else if (*run) {
        spdlog::info("running {}", file);
        rc = optcon::cli::cmd_run(file, run_opt, std::cout);
        spdlog::info("run finished with status {}", rc);
    } else if (*oracle) {
        rc = optcon::cli::cmd_oracle(file, std::cout);
    } else if (*scaffold) {
        spdlog::debug("scaffolding example {} into {}", example, file);
        rc = optcon::cli::cmd_scaffold(example, file, std::cout);
    }
    if (rc != 0) spdlog::warn("exit status {}", rc);
    return rc;
}
