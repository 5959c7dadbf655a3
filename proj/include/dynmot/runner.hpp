#pragma once

// Experiment orchestration: dispatch a parsed configuration to the solver or
// trainer it asks for, collect a single structured result record, and write
// every output file atomically (write to a temp file, then rename) so a
// failed run never leaves partial files behind.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dynmot/bounds.hpp"
#include "dynmot/config.hpp"
#include "dynmot/nn.hpp"

namespace dynmot {

inline constexpr const char* tool_name = "dynmot";
inline constexpr const char* tool_version = "1.0.0";

// Stable exit-code contract.  Configuration problems use 1 and are raised as
// ConfigError before any solve starts; the remaining codes mirror Status.
inline int exit_code(Status s) noexcept {
    switch (s) {
        case Status::optimal: return 0;
        case Status::infeasible: return 2;
        case Status::unbounded: return 3;
        case Status::numerical_failure: return 4;
    }
    return 4;
}
inline constexpr int exit_config_error = 1;

// Writes through a sibling temp file and renames into place, so readers never
// observe a partially written file and failures leave no output at all.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ConfigError("output: cannot write '" + tmp.string() + "'");
        os << text;
        os.flush();
        if (!os) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw ConfigError("output: failed writing '" + tmp.string() + "'");
        }
    }
    std::filesystem::rename(tmp, path);
}

struct RunOutcome {
    int exit_code = exit_config_error;
    Json record;
    std::vector<std::filesystem::path> files;  // everything written, record first
};

namespace runnerdetail {

inline Json grid_stats(const std::shared_ptr<const ScenarioGrid>& grid) {
    Json j;
    if (grid) {
        j["scenarios"] = grid->num_scenarios();
        j["paths"] = grid->num_paths();
        j["quote_triples"] = grid->num_triples();
    }
    return j;
}

inline void report_failure(Json& record, const BoundReport& rep) {
    record["message"] = rep.message;
    if (!rep.infeasible_prefix.empty()) record["infeasible_prefix"] = rep.infeasible_prefix;
}

inline void fill_bound_record(Json& record, const BoundReport& rep, bool with_baseline) {
    record["status"] = to_string(rep.status);
    Json solver = grid_stats(rep.grid);
    solver["primal_iterations"] = rep.primal_iterations;
    solver["dual_iterations"] = rep.dual_iterations;
    record["solver"].update(solver);
    if (rep.status != Status::optimal) {
        report_failure(record, rep);
        return;
    }
    Json v;
    v["bound"] = rep.primal_value;
    v["primal"] = rep.primal_value;
    v["dual"] = rep.dual_value;
    v["gap"] = rep.gap;
    if (with_baseline) {
        v["mot_baseline"] = rep.mot_baseline;
        v["hedge_margin"] = rep.hedge_margin;
    }
    record["values"] = v;
}

}  // namespace runnerdetail

// Runs the configured task and writes the result record (plus any task files)
// into `out_dir`.  Schema problems have already been rejected by the parser;
// semantic failures during the run are reported through the record's status
// and the matching exit code.  Throws ConfigError only for unwritable output.
inline RunOutcome run_experiment(const ExperimentConfig& cfg,
                                 std::filesystem::path out_dir = {}, int threads = 1) {
    if (out_dir.empty()) out_dir = cfg.out_dir;
    std::filesystem::create_directories(out_dir);
    const auto t0 = std::chrono::steady_clock::now();

    RunOutcome out;
    Json& record = out.record;
    record["tool"]["name"] = tool_name;
    record["tool"]["version"] = tool_version;
    record["config"] = cfg.to_json();
    record["task"] = cfg.task.kind;
    record["solver"] = Json::object();
    record["solver"]["threads"] = threads;

    const MarginalSystem ms = cfg.build_marginals();
    const std::vector<TradableOption> options = cfg.build_options();
    const PricingRule rule = cfg.build_rule();
    const PayoffFunction payoff = cfg.build_payoff();

    Status status = Status::numerical_failure;
    std::vector<std::pair<std::filesystem::path, std::string>> extra_files;

    try {
        if (cfg.task.kind == "bound") {
            const BoundReport rep = price_bound(cfg.task.side, ms, options, rule, payoff);
            status = rep.status;
            runnerdetail::fill_bound_record(record, rep, true);
        } else if (cfg.task.kind == "sweep") {
            const SweepResult sweep = epsilon_sweep(cfg.task.side, ms, options, rule,
                                                    cfg.task.eps1, cfg.task.eps2, payoff);
            status = Status::optimal;
            record["status"] = to_string(status);
            Json rows = Json::array();
            for (const auto& e : sweep.entries) {
                Json r;
                r["eps1"] = e.eps1;
                r["eps2"] = e.eps2;
                r["bound"] = e.bound;
                r["status"] = to_string(e.status);
                r["mot_baseline"] = e.mot_baseline;
                rows.push_back(r);
            }
            record["values"]["rows"] = rows;
            record["solver"]["entries"] = sweep.entries.size();
            std::ostringstream csv;
            write_sweep_csv(csv, sweep);
            extra_files.emplace_back(out_dir / "sweep.csv", csv.str());
        } else if (cfg.task.kind == "nn") {
            const EstimateResult est =
                estimate_bound(ms, options, rule, payoff, cfg.build_train_config());
            status = Status::optimal;
            record["status"] = to_string(status);
            record["values"]["estimate"] = est.estimate;
            record["values"]["std_error"] = est.std_error;
            Json runs = Json::array();
            for (const auto& r : est.runs) {
                Json rr;
                rr["seed"] = r.seed;
                rr["estimate"] = r.estimate;
                runs.push_back(rr);
                std::ostringstream csv;
                write_loss_csv(csv, r.loss_history);
                extra_files.emplace_back(
                    out_dir / ("loss_seed" + std::to_string(r.seed) + ".csv"), csv.str());
            }
            record["values"]["runs"] = runs;
            record["solver"]["iterations"] = cfg.task.nn.iterations;
            record["solver"]["runs"] = cfg.task.nn.runs;
        } else if (cfg.task.kind == "tcost") {
            std::vector<std::vector<double>> supports;
            for (int i = 1; i <= ms.periods(); ++i) supports.push_back(ms.marginal(i).points);
            const BoundReport rep =
                transaction_cost_bound(cfg.task.side, std::move(supports), ms.s0(), options,
                                       rule, payoff, cfg.build_frictions());
            status = rep.status;
            runnerdetail::fill_bound_record(record, rep, false);
        } else {
            throw ConfigError("config.task.kind: unknown task '" + cfg.task.kind + "'");
        }
    } catch (const InfeasibleRuleError& e) {
        status = Status::infeasible;
        record["status"] = to_string(status);
        record["message"] = e.what();
        record["infeasible_prefix"] = e.prefix();
    } catch (const NumericalError& e) {
        status = Status::numerical_failure;
        record["status"] = to_string(status);
        record["message"] = e.what();
    }

    const auto t1 = std::chrono::steady_clock::now();
    record["timings"]["seconds"] = std::chrono::duration<double>(t1 - t0).count();

    // The record always lands; task files only accompany a successful run.
    const std::filesystem::path record_path = out_dir / "result.json";
    write_text_atomic(record_path, record.dump(2) + "\n");
    out.files.push_back(record_path);
    if (status == Status::optimal)
        for (const auto& [path, text] : extra_files) {
            write_text_atomic(path, text);
            out.files.push_back(path);
        }

    out.exit_code = exit_code(status);
    return out;
}

}  // namespace dynmot
