// Command-line harness: experiment grids over the mixing strategies, trace
// analysis, and the MEGA-I epsilon search.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradmix/analysis.hpp"
#include "gradmix/config.hpp"
#include "gradmix/continuum.hpp"
#include "gradmix/experiment.hpp"
#include "gradmix/svg_plot.hpp"
#include "gradmix/text_io.hpp"

namespace {

using namespace gradmix;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string fmt3(double v) {
    if (std::isnan(v)) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

void print_summary(const ResultsTable& table) {
    std::cout << "method      runs  A_T              F_T              LCA_10\n";
    for (const auto& [method, agg] : table.aggregates) {
        auto cell = [](const Aggregate& a) {
            std::string s = fmt3(a.mean);
            if (!std::isnan(a.stddev)) s += " +- " + fmt3(a.stddev);
            return s;
        };
        std::cout << method << std::string(12 - std::min<std::size_t>(11, method.size()), ' ')
                  << agg.a_T.n << "     " << cell(agg.a_T) << "  " << cell(agg.f_T) << "  "
                  << cell(agg.lca) << "\n";
    }
    for (const auto& f : table.failures) std::cout << "FAILED: " << f << "\n";
}

struct RunOverrides {
    std::optional<std::string> method, dataset, seeds, output, mnist_dir, hidden;
    std::optional<int> tasks, examples, memory, batch, ref_batch, cv_tasks, workers, eval_batches;
    std::optional<double> lr, epsilon;
    bool no_plots = false;
    bool trace = false;
    bool no_timing = false;
};

void apply_overrides(Config& cfg, const RunOverrides& ov) {
    if (ov.method) cfg.set("run.methods", *ov.method);
    if (ov.dataset) cfg.set("stream.kind", *ov.dataset);
    if (ov.tasks) cfg.set("stream.tasks", std::to_string(*ov.tasks));
    if (ov.examples) cfg.set("stream.examples_per_task", std::to_string(*ov.examples));
    if (ov.cv_tasks) cfg.set("stream.cv_tasks", std::to_string(*ov.cv_tasks));
    if (ov.memory) cfg.set("run.memory_per_task", std::to_string(*ov.memory));
    if (ov.batch) cfg.set("run.batch_size", std::to_string(*ov.batch));
    if (ov.ref_batch) cfg.set("run.ref_batch_size", std::to_string(*ov.ref_batch));
    if (ov.eval_batches) cfg.set("run.eval_batches", std::to_string(*ov.eval_batches));
    if (ov.lr) cfg.set("run.lr", format_double(*ov.lr));
    if (ov.epsilon) cfg.set("run.epsilon", format_double(*ov.epsilon));
    if (ov.seeds) cfg.set("run.seeds", *ov.seeds);
    if (ov.output) cfg.set("output.dir", *ov.output);
    if (ov.mnist_dir) cfg.set("data.mnist_dir", *ov.mnist_dir);
    if (ov.hidden) cfg.set("net.hidden", *ov.hidden);
    if (ov.workers) cfg.set("output.workers", std::to_string(*ov.workers));
    if (ov.no_plots) cfg.set("output.plots", "off");
    if (ov.trace) cfg.set("output.trace", "on");
    if (ov.no_timing) cfg.set("output.timing", "off");
}

int cmd_run(const std::string& config_path, const RunOverrides& ov) {
    Config cfg = config_path.empty() ? Config() : Config::parse_file(config_path);
    apply_overrides(cfg, ov);
    const ExperimentPlan plan = plan_from_config(cfg);
    const ResultsTable table = run_plan(plan);
    std::cout << "wrote " << plan.output_dir << "/results.csv and metrics.json\n";
    print_summary(table);
    return table.failures.empty() ? 0 : 1;
}

int cmd_k2_hist(const std::string& traces_dir, int bins, const std::string& svg_out) {
    namespace fs = std::filesystem;
    std::vector<std::vector<TraceRow>> traces;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(traces_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) traces.push_back(trace_from_csv(read_file(f.string())));
    if (traces.empty()) {
        std::cerr << "no .csv traces under " << traces_dir << "\n";
        return 1;
    }
    const K2Histogram hist = k2_histogram(traces, bins);

    std::cout << "steps with k2: " << hist.total << "\n";
    if (hist.underflow > 0) std::cout << "  k2 = 0        " << hist.underflow << "\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        std::cout << "  [" << fmt3(hist.edges[i]) << ", " << fmt3(hist.edges[i + 1]) << ")  "
                  << hist.counts[i] << "\n";
    }
    if (hist.overflow > 0) std::cout << "  k2 = inf      " << hist.overflow << "\n";
    std::cout << "fraction k2 < 1: " << format_double(hist.fraction_below_one) << "\n";

    if (!svg_out.empty()) {
        std::ofstream out(svg_out, std::ios::binary);
        out << k2_hist_svg(hist);
        std::cout << "wrote " << svg_out << "\n";
    }
    return 0;
}

int cmd_search_epsilon(const std::string& config_path, const std::string& grid_csv,
                       const RunOverrides& ov) {
    Config cfg = config_path.empty() ? Config() : Config::parse_file(config_path);
    apply_overrides(cfg, ov);
    ExperimentPlan plan = plan_from_config(cfg);
    if (plan.stream_cfg.cv_tasks < 1) {
        std::cerr << "search-epsilon needs stream.cv_tasks >= 1\n";
        return 1;
    }
    const PreparedStream prepared = prepare_stream(plan);

    std::vector<double> grid;
    for (std::string_view p : split(grid_csv, ',')) {
        if (!trim(p).empty()) grid.push_back(parse_double(trim(p)));
    }
    RunConfig rc = plan.run_cfgs.front();
    rc.method = Method::mega1;
    const double best = search_epsilon(prepared.spec, prepared.cv_tasks, grid, rc);
    std::cout << "best epsilon: " << format_double(best) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continual-learning benchmark harness (VAN / GEM / A-GEM / MEGA-I / MEGA-II)"};
    app.require_subcommand(1);

    std::string config_path;
    RunOverrides ov;

    auto* run_cmd = app.add_subcommand("run", "execute an experiment plan");
    run_cmd->add_option("--config", config_path, "key=value config file");
    run_cmd->add_option("--method", ov.method, "methods, comma-separated");
    run_cmd->add_option("--dataset", ov.dataset, "permuted | split | synthetic");
    run_cmd->add_option("--tasks", ov.tasks, "number of tasks");
    run_cmd->add_option("--examples-per-task", ov.examples, "X; 0 = all available");
    run_cmd->add_option("--memory-per-task", ov.memory, "episodic capacity per task");
    run_cmd->add_option("--batch-size", ov.batch, "training minibatch size");
    run_cmd->add_option("--ref-batch-size", ov.ref_batch, "reference batch size");
    run_cmd->add_option("--eval-batches", ov.eval_batches, "early-evaluation horizon");
    run_cmd->add_option("--lr", ov.lr, "learning rate");
    run_cmd->add_option("--epsilon", ov.epsilon, "MEGA-I sensitivity threshold");
    run_cmd->add_option("--seeds", ov.seeds, "seeds, comma-separated");
    run_cmd->add_option("--cv-tasks", ov.cv_tasks, "tasks reserved for validation");
    run_cmd->add_option("--output", ov.output, "output directory");
    run_cmd->add_option("--mnist-dir", ov.mnist_dir, "directory with IDX files");
    run_cmd->add_option("--hidden", ov.hidden, "hidden layer widths, comma-separated");
    run_cmd->add_option("--workers", ov.workers, "parallel runs");
    run_cmd->add_flag("--no-plots", ov.no_plots, "skip SVG plots");
    run_cmd->add_flag("--trace", ov.trace, "write per-run trace CSVs");
    run_cmd->add_flag("--no-timing", ov.no_timing, "write wall_time_s as 0 for byte-stable output");

    auto* analyze = app.add_subcommand("analyze", "inspect recorded traces");
    std::string traces_dir;
    int bins = 40;
    std::string svg_out;
    auto* k2 = analyze->add_subcommand("k2-hist", "histogram of log10(k2)");
    k2->add_option("--traces", traces_dir, "directory of trace CSVs")->required();
    k2->add_option("--bins", bins, "histogram bins");
    k2->add_option("--svg", svg_out, "also write an SVG here");
    analyze->require_subcommand(1);

    auto* search = app.add_subcommand("search-epsilon", "grid-search MEGA-I's epsilon on the CV tasks");
    std::string search_config;
    std::string grid_csv = "1e-5,1e-4,1e-3,1e-2,1e-1";
    search->add_option("--config", search_config, "key=value config file");
    search->add_option("--grid", grid_csv, "epsilon grid, comma-separated");
    search->add_option("--seeds", ov.seeds, "seed for the search runs");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(config_path, ov);
        if (analyze->parsed()) return cmd_k2_hist(traces_dir, bins, svg_out);
        if (search->parsed()) return cmd_search_epsilon(search_config, grid_csv, ov);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
