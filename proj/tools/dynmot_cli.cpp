// Command-line driver: one experiment per invocation, selected by subcommand
// and described by a JSON configuration file.  Exit codes: 0 optimal,
// 1 configuration/usage error, 2 infeasible, 3 unbounded, 4 numerical failure.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "dynmot/runner.hpp"

namespace {

void print_errors(const dynmot::ConfigError& e) {
    for (const auto& msg : e.messages()) std::fprintf(stderr, "error: %s\n", msg.c_str());
}

void print_headline(const dynmot::Json& record) {
    const std::string task = record["task"].get<std::string>();
    if (!record.contains("values")) return;
    const dynmot::Json& v = record["values"];
    if (task == "bound" || task == "tcost")
        std::printf("bound: %.17g\n", v["bound"].get<double>());
    else if (task == "sweep")
        std::printf("rows: %zu\n", v["rows"].size());
    else if (task == "nn")
        std::printf("estimate: %.17g (std error %.17g)\n", v["estimate"].get<double>(),
                    v["std_error"].get<double>());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Price bounds for exotic payoffs under marginal constraints and "
                 "dynamically traded options with interval pricing rules"};
    app.set_version_flag("--version", dynmot::tool_version);
    app.require_subcommand(1);

    std::string config_path, out_dir;
    long long seed = 0;
    int threads = 1;
    app.add_option("--config", config_path, "JSON experiment configuration")->required();
    app.add_option("--out", out_dir, "output directory (default: out_dir from the config)");
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--threads", threads, "worker threads (the engine is deterministic)");

    for (const char* name : {"bound", "sweep", "nn", "tcost"})
        app.add_subcommand(name, std::string("run a '") + name + "' task")->fallthrough();
    app.add_subcommand("validate", "parse and validate the config, run nothing")
        ->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return dynmot::exit_config_error;
    }
    const std::string sub = app.get_subcommands().front()->get_name();

    try {
        if (app.count("--seed") > 0 && seed < 0)
            throw dynmot::ConfigError("--seed: must be >= 0");
        if (threads < 1) throw dynmot::ConfigError("--threads: must be >= 1");

        dynmot::ExperimentConfig cfg = dynmot::parse_config_file(config_path);
        if (sub == "validate") {
            std::printf("configuration ok\n");
            return 0;
        }
        if (cfg.task.kind != sub)
            throw dynmot::ConfigError("config.task.kind: config declares task '" +
                                      cfg.task.kind + "' but subcommand '" + sub +
                                      "' was invoked");
        if (app.count("--seed") > 0) cfg.seed = static_cast<unsigned long long>(seed);
        if (!out_dir.empty()) cfg.out_dir = out_dir;

        const dynmot::RunOutcome outcome = dynmot::run_experiment(cfg, cfg.out_dir, threads);
        std::printf("status: %s\n", outcome.record["status"].get<std::string>().c_str());
        print_headline(outcome.record);
        for (const auto& f : outcome.files) std::printf("wrote: %s\n", f.string().c_str());
        if (outcome.record.contains("message"))
            std::fprintf(stderr, "%s\n", outcome.record["message"].get<std::string>().c_str());
        return outcome.exit_code;
    } catch (const dynmot::ConfigError& e) {
        print_errors(e);
        return dynmot::exit_config_error;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return dynmot::exit_code(dynmot::Status::numerical_failure);
    }
}
