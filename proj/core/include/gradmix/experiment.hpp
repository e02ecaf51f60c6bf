#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gradmix/analysis.hpp"
#include "gradmix/config.hpp"
#include "gradmix/continuum.hpp"

namespace gradmix {

/// A method x seed grid over one task stream, plus output options.
struct ExperimentPlan {
    StreamConfig stream_cfg;
    std::vector<int> hidden_dims = {32, 32};
    std::vector<RunConfig> run_cfgs;
    std::string output_dir = "out";
    bool emit_plots = true;
    bool emit_trace = false;
    bool measure_time = true;  // off: wall_time_s column is written as 0
    int workers = 1;
    std::string mnist_dir;   // IDX files for permuted/split; empty = synthetic base
    int base_examples = 2000;  // synthetic base pool size for permuted/split
    int k2_bins = 40;
};

/// Assemble a plan from the key=value config (sections [stream], [net],
/// [run], [data], [output]). Throws on unknown method names or malformed
/// numeric lists.
ExperimentPlan plan_from_config(const Config& cfg);

struct ResultRow {
    std::string method;
    std::uint64_t seed = 0;
    double a_T = 0.0;
    double f_T = 0.0;
    double lca = 0.0;
    double wall_time_s = 0.0;
};

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // NaN when fewer than two runs
    int n = 0;
};

struct MethodAggregates {
    Aggregate a_T, f_T, lca;
};

struct ResultsTable {
    std::vector<ResultRow> rows;  // sorted by (method, seed)
    std::map<std::string, MethodAggregates> aggregates;
    std::map<std::string, std::vector<double>> a_k_evolution;  // mean over seeds
    std::map<std::string, std::vector<double>> z_b_evolution;
    std::vector<std::string> failures;  // one message per failed run
};

/// Stream generation and the network shape it implies.
struct PreparedStream {
    std::vector<TaskSpec> cv_tasks;
    std::vector<TaskSpec> eval_tasks;
    NetworkSpec spec;
};

PreparedStream prepare_stream(const ExperimentPlan& plan);

/// Execute every run of the plan (optionally across parallel workers),
/// then write results.csv, metrics.json, optional per-run traces and SVG
/// plots under plan.output_dir. Failed runs are reported in the table and
/// leave a failure marker in their trace file; successful runs are written
/// regardless.
ResultsTable run_plan(const ExperimentPlan& plan);

/// Recompute the per-method aggregates and evolution-independent fields from
/// `rows` (rows are sorted in place).
void compute_aggregates(ResultsTable& table);

std::string results_to_csv(const ResultsTable& table);
std::vector<ResultRow> results_rows_from_csv(const std::string& text);
std::string metrics_to_json(const ResultsTable& table);

}  // namespace gradmix
