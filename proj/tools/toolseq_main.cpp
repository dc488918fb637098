#include <atomic>
#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "toolseq/experiment.hpp"

namespace {

std::atomic<bool> g_stop{false};

extern "C" void handle_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, char** argv) {
    namespace ex = toolseq::experiment;

    CLI::App app{"Procedure execution experiments for tool-calling agents"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::string servers;
    std::optional<int> workers;
    app.add_option("--config", config_path, "Scenario config file (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Override the config seed");
    app.add_option("--out", out, "Output directory; every artifact path is relative to it");
    app.add_option("--servers", servers, "host:port list mapped to tool servers 1-3 (default: in-process)");
    app.add_option("--workers", workers, "Concurrent runs")->check(CLI::PositiveNumber);

    auto* gen = app.add_subcommand("gen", "Write the KPI pool and the stress procedures");
    auto* serve = app.add_subcommand("serve", "Serve the scenario tool servers over HTTP");
    auto* run = app.add_subcommand("run", "Execute all runs and append them to runs.jsonl");
    auto* classify = app.add_subcommand("classify", "Classify runs.jsonl into classified.jsonl");
    auto* report = app.add_subcommand("report", "Write summary CSVs and report.md");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ex::exit_code::kOk : ex::exit_code::kUsage;
    }

    try {
        auto config = ex::load_config(config_path);
        ex::GlobalOptions options{seed, out, servers, workers};
        ex::apply_overrides(config, options);

        if (gen->parsed()) return ex::cmd_gen(config, options, std::cerr);
        if (run->parsed()) return ex::cmd_run(config, options, std::cerr);
        if (classify->parsed()) return ex::cmd_classify(config, options, std::cerr);
        if (report->parsed()) return ex::cmd_report(config, options, std::cerr);
        if (serve->parsed()) {
            std::signal(SIGINT, handle_signal);
            std::signal(SIGTERM, handle_signal);
            return ex::cmd_serve(config, options, std::cerr, g_stop);
        }
    } catch (const ex::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return ex::exit_code::kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ex::exit_code::kPartial;
    }
    return ex::exit_code::kUsage;
}
