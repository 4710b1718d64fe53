// Command-line runner for the loglayer library.
//
// Subcommands: eigen, continue, limit, verify, report.  Every subcommand
// reads one JSON case config (--config) and writes machine-readable
// artifacts into an output directory (--out).  The pipeline is fully
// deterministic: identical config and build produce byte-identical outputs.
//
// Exit codes: 0 success, 2 config/usage error, 3 solver failure,
// 4 verification gates failed.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "loglayer/loglayer.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    int threads = 1;
    bool seedless = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "path to the JSON case config")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "output directory (created if absent)");
    cmd->add_option("--threads", args.threads, "worker thread cap for parallel sweeps")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--seedless", args.seedless,
                  "assert that the run consults no random number generator "
                  "(always true: the pipeline is deterministic)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"loglayer: numerical laboratory for -Delta u = u - u^p with "
                 "du/dnu = mu u^q on radial domains"};
    app.require_subcommand(1);

    CommonArgs args;
    CLI::App* cmd_eigen = app.add_subcommand(
        "eigen", "principal Dirichlet eigenpair, barrier constants and amplitudes");
    CLI::App* cmd_continue = app.add_subcommand(
        "continue", "continuation of u_mu along the mu schedule (curve.csv, profiles/)");
    CLI::App* cmd_limit = app.add_subcommand(
        "limit", "boundary blow-up limit problem and layer distances (u_infinity.csv, layer.csv)");
    CLI::App* cmd_verify = app.add_subcommand(
        "verify", "run all verification gates and write verify.json (exit 4 on gate failure)");
    CLI::App* cmd_report = app.add_subcommand(
        "report", "emit gnuplot-ready .dat files and a plotting script stub");
    for (CLI::App* c : {cmd_eigen, cmd_continue, cmd_limit, cmd_verify, cmd_report})
        add_common(c, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and friends exit 0; genuine usage errors map to the
        // config/usage exit code
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const loglayer::CaseConfig cfg = loglayer::load_config(args.config_path);
        if (cmd_eigen->parsed()) {
            loglayer::run_eigen(cfg, args.out_dir);
        } else if (cmd_continue->parsed()) {
            loglayer::run_continue(cfg, args.out_dir);
        } else if (cmd_limit->parsed()) {
            loglayer::run_limit(cfg, args.out_dir);
        } else if (cmd_verify->parsed()) {
            const auto outcome = loglayer::run_verify(cfg, args.out_dir);
            if (!outcome.all_gates_pass) {
                std::fprintf(stderr, "verify: one or more gates failed (see verify.json)\n");
                return 4;
            }
        } else if (cmd_report->parsed()) {
            loglayer::run_report(cfg, args.out_dir);
        }
    } catch (const loglayer::validation_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const loglayer::error& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 3;
    }
    return 0;
}
