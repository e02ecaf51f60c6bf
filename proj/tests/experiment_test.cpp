#include "gradmix/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <gtest/gtest.h>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "gradmix/svg_plot.hpp"
#include "gradmix/text_io.hpp"

namespace gradmix {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    EXPECT_TRUE(in.good()) << p;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("gradmix_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Config tiny_config(const std::string& out_dir, const std::string& methods,
                   const std::string& seeds) {
    return Config::parse_string(
        "[stream]\n"
        "kind = synthetic\n"
        "tasks = 3\n"
        "examples_per_task = 60\n"
        "test_per_task = 50\n"
        "dim = 8\n"
        "classes = 3\n"
        "seed = 42\n"
        "[net]\n"
        "hidden = 8\n"
        "[run]\n"
        "methods = " + methods + "\n"
        "seeds = " + seeds + "\n"
        "lr = 0.05\n"
        "batch_size = 10\n"
        "ref_batch_size = 16\n"
        "memory_per_task = 20\n"
        "eval_batches = 3\n"
        "[output]\n"
        "dir = " + out_dir + "\n"
        "trace = on\n"
        "timing = off\n");
}

TEST(ConfigTest, SectionsAndOverrides) {
    Config cfg = Config::parse_string(
        "# comment\n"
        "[stream]\n"
        "kind = permuted\n"
        "tasks = 7\n"
        "[run]\n"
        "lr = 0.25\n"
        "plots = off\n");
    EXPECT_EQ(cfg.get("stream.kind", ""), "permuted");
    EXPECT_EQ(cfg.get_int("stream.tasks", 0), 7);
    EXPECT_DOUBLE_EQ(cfg.get_double("run.lr", 0.0), 0.25);
    EXPECT_EQ(cfg.get_int("stream.cv_tasks", 4), 4);
    cfg.set("stream.tasks", "9");
    EXPECT_EQ(cfg.get_int("stream.tasks", 0), 9);
    EXPECT_THROW(Config::parse_string("[open\n"), std::runtime_error);
    EXPECT_THROW(Config::parse_string("novalue\n"), std::runtime_error);
}

TEST(PlanFromConfigTest, BuildsMethodSeedGrid) {
    const Config cfg = tiny_config("unused", "van,mega2", "1,2,3");
    const ExperimentPlan plan = plan_from_config(cfg);
    EXPECT_EQ(plan.run_cfgs.size(), 6u);
    EXPECT_EQ(plan.run_cfgs[0].method, Method::van);
    EXPECT_EQ(plan.run_cfgs[5].method, Method::mega2);
    EXPECT_EQ(plan.run_cfgs[5].seed, 3u);
    EXPECT_FALSE(plan.measure_time);
    EXPECT_TRUE(plan.emit_trace);
}

TEST(PlanFromConfigTest, RejectsUnknownMethod) {
    EXPECT_THROW(plan_from_config(Config::parse_string("[run]\nmethods = sgdx\n")),
                 std::invalid_argument);
}

TEST(RunPlanTest, WritesAllArtifacts) {
    TempDir tmp("artifacts");
    const auto t0 = std::chrono::steady_clock::now();
    const ResultsTable table =
        run_plan(plan_from_config(tiny_config(tmp.path.string(), "mega1", "1")));
    const double elapsed = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(elapsed, 60.0);  // desk-scale smoke budget

    ASSERT_EQ(table.rows.size(), 1u);
    EXPECT_TRUE(table.failures.empty());
    EXPECT_TRUE(fs::exists(tmp.path / "results.csv"));
    EXPECT_TRUE(fs::exists(tmp.path / "metrics.json"));
    EXPECT_TRUE(fs::exists(tmp.path / "trace_mega1_1.csv"));
    EXPECT_TRUE(fs::exists(tmp.path / "plots" / "avg_accuracy.svg"));
    EXPECT_TRUE(fs::exists(tmp.path / "plots" / "lca.svg"));
    EXPECT_TRUE(fs::exists(tmp.path / "plots" / "k2_hist.svg"));

    const std::string csv = slurp(tmp.path / "results.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,seed,A_T,F_T,LCA_10,wall_time_s");
}

TEST(RunPlanTest, NoPlotsFlagSuppressesPlotDirectory) {
    TempDir tmp("noplots");
    Config cfg = tiny_config(tmp.path.string(), "van", "1");
    cfg.set("output.plots", "off");
    run_plan(plan_from_config(cfg));
    EXPECT_FALSE(fs::exists(tmp.path / "plots"));
}

TEST(RunPlanTest, AggregatesAppearWithTwoSeeds) {
    TempDir tmp("agg");
    const ResultsTable table =
        run_plan(plan_from_config(tiny_config(tmp.path.string(), "van", "1,2")));
    const auto& agg = table.aggregates.at("van");
    EXPECT_EQ(agg.a_T.n, 2);
    EXPECT_FALSE(std::isnan(agg.a_T.stddev));
    // single-seed std is undefined and serialized as null
    TempDir tmp2("agg1");
    const ResultsTable one =
        run_plan(plan_from_config(tiny_config(tmp2.path.string(), "van", "1")));
    EXPECT_TRUE(std::isnan(one.aggregates.at("van").a_T.stddev));
    const auto json = nlohmann::json::parse(metrics_to_json(one));
    EXPECT_TRUE(json["aggregates"]["van"]["A_T"]["std"].is_null());
}

TEST(RunPlanTest, IdenticalConfigGivesIdenticalBytes) {
    TempDir a("det_a"), b("det_b");
    run_plan(plan_from_config(tiny_config(a.path.string(), "van,agem,mega2", "1,2")));
    run_plan(plan_from_config(tiny_config(b.path.string(), "van,agem,mega2", "1,2")));
    EXPECT_EQ(slurp(a.path / "results.csv"), slurp(b.path / "results.csv"));
    EXPECT_EQ(slurp(a.path / "metrics.json"), slurp(b.path / "metrics.json"));
    EXPECT_EQ(slurp(a.path / "plots" / "avg_accuracy.svg"),
              slurp(b.path / "plots" / "avg_accuracy.svg"));
}

TEST(RunPlanTest, ParallelWorkersConvergeToTheSameBytes) {
    TempDir a("par_a"), b("par_b");
    Config ca = tiny_config(a.path.string(), "van,agem,mega1,mega2", "1,2");
    Config cb = tiny_config(b.path.string(), "van,agem,mega1,mega2", "1,2");
    cb.set("output.workers", "4");
    run_plan(plan_from_config(ca));
    run_plan(plan_from_config(cb));
    EXPECT_EQ(slurp(a.path / "results.csv"), slurp(b.path / "results.csv"));
    EXPECT_EQ(slurp(a.path / "metrics.json"), slurp(b.path / "metrics.json"));
}

TEST(RunPlanTest, CsvReparseReproducesAggregatesExactly) {
    TempDir tmp("roundtrip");
    run_plan(plan_from_config(tiny_config(tmp.path.string(), "van,mega2,multitask", "1,2")));
    const std::string csv = slurp(tmp.path / "results.csv");
    ResultsTable rebuilt;
    rebuilt.rows = results_rows_from_csv(csv);
    compute_aggregates(rebuilt);

    const auto stored = nlohmann::json::parse(slurp(tmp.path / "metrics.json"));
    const auto recomputed = nlohmann::json::parse(metrics_to_json(rebuilt));
    EXPECT_EQ(stored["aggregates"], recomputed["aggregates"]);
    EXPECT_EQ(stored["runs"], recomputed["runs"]);
}

TEST(RunPlanTest, FailingRunLeavesMarkerAndPreservesOthers) {
    TempDir tmp("failure");
    Config cfg = tiny_config(tmp.path.string(), "van", "1,2");
    cfg.set("run.lr", "1e100");  // diverges immediately
    Config ok = tiny_config(tmp.path.string(), "van", "1,2");

    // mix one healthy and one diverging run via two plans sharing the dir
    ExperimentPlan plan = plan_from_config(ok);
    plan.run_cfgs[1].lr = 1e100;
    const ResultsTable table = run_plan(plan);
    EXPECT_EQ(table.rows.size(), 1u);
    ASSERT_EQ(table.failures.size(), 1u);
    EXPECT_NE(table.failures[0].find("seed 2"), std::string::npos);

    const std::string failed_trace = slurp(tmp.path / "trace_van_2.csv");
    EXPECT_NE(failed_trace.find("# run failed:"), std::string::npos);
    EXPECT_TRUE(fs::exists(tmp.path / "results.csv"));
    const auto rows = results_rows_from_csv(slurp(tmp.path / "results.csv"));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].seed, 1u);
}

TEST(RunPlanTest, DuplicateSeedsWithinMethodAreRejected) {
    Config cfg = tiny_config("unused", "van", "1,1");
    EXPECT_THROW(run_plan(plan_from_config(cfg)), std::invalid_argument);
}

TEST(K2HistogramTest, BoundaryConventionIsStrict) {
    std::vector<TraceRow> trace(3);
    for (auto& r : trace) r.k2 = 1.0;
    const K2Histogram hist = k2_histogram({trace}, 5);
    EXPECT_EQ(hist.total, 3);
    EXPECT_DOUBLE_EQ(hist.fraction_below_one, 0.0);
    int nonzero_bins = 0;
    for (long c : hist.counts) nonzero_bins += (c > 0);
    EXPECT_EQ(nonzero_bins, 1);  // all mass in one central bin
}

TEST(K2HistogramTest, HandBuiltFraction) {
    std::vector<TraceRow> trace(3);
    trace[0].k2 = 0.5;
    trace[1].k2 = 2.0;
    trace[2].k2 = 4.0;
    const K2Histogram hist = k2_histogram({trace}, 4);
    EXPECT_NEAR(hist.fraction_below_one, 1.0 / 3.0, 1e-15);
}

TEST(K2HistogramTest, ZeroAndInfinityLandInOverflowSlots) {
    std::vector<TraceRow> trace(4);
    trace[0].k2 = 0.0;
    trace[1].k2 = std::numeric_limits<double>::infinity();
    trace[2].k2 = 1.0;
    trace[3].k2 = std::numeric_limits<double>::quiet_NaN();  // undefined: skipped
    const K2Histogram hist = k2_histogram({trace}, 3);
    EXPECT_EQ(hist.underflow, 1);
    EXPECT_EQ(hist.overflow, 1);
    EXPECT_EQ(hist.total, 3);
    EXPECT_NEAR(hist.fraction_below_one, 1.0 / 3.0, 1e-15);
}

TEST(K2HistogramTest, EmptyTracesAreRejected) {
    EXPECT_THROW(k2_histogram({}, 4), std::invalid_argument);
    std::vector<TraceRow> only_nan(2);
    only_nan[0].k2 = only_nan[1].k2 = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(k2_histogram({only_nan}, 4), std::invalid_argument);
}

TEST(SvgPlotTest, DeterministicBytesAndEmbeddedValues) {
    std::map<std::string, std::vector<double>> series;
    series["mega2"] = {0.4, 0.55, 0.6123456789012345};
    series["van"] = {0.3, 0.2, 0.25};
    const std::string svg1 = accuracy_plot_svg(series);
    const std::string svg2 = accuracy_plot_svg(series);
    EXPECT_EQ(svg1, svg2);

    // three-point polyline per method
    std::size_t polylines = 0, pos = 0;
    while ((pos = svg1.find("<polyline", pos)) != std::string::npos) {
        ++polylines;
        pos += 9;
    }
    EXPECT_EQ(polylines, 2u);

    // embedded data round-trips to the exact doubles
    const std::string tag = "data-method=\"mega2\" data-values=\"";
    const std::size_t at = svg1.find(tag);
    ASSERT_NE(at, std::string::npos);
    const std::size_t end = svg1.find('"', at + tag.size());
    const std::string values = svg1.substr(at + tag.size(), end - at - tag.size());
    const auto parts = split(values, ',');
    ASSERT_EQ(parts.size(), 3u);
    EXPECT_EQ(parse_double(parts[2]), 0.6123456789012345);
}

TEST(SvgPlotTest, PlotValuesMatchMetricsJsonExactly) {
    TempDir tmp("svgmatch");
    run_plan(plan_from_config(tiny_config(tmp.path.string(), "mega2", "1,2")));
    const auto json = nlohmann::json::parse(slurp(tmp.path / "metrics.json"));
    const std::vector<double> a_k = json["evolution"]["mega2"]["A_k"];

    const std::string svg = slurp(tmp.path / "plots" / "avg_accuracy.svg");
    const std::string tag = "data-method=\"mega2\" data-values=\"";
    const std::size_t at = svg.find(tag);
    ASSERT_NE(at, std::string::npos);
    const std::size_t end = svg.find('"', at + tag.size());
    const auto parts = split(svg.substr(at + tag.size(), end - at - tag.size()), ',');
    ASSERT_EQ(parts.size(), a_k.size());
    for (std::size_t i = 0; i < a_k.size(); ++i) {
        EXPECT_EQ(parse_double(parts[i]), a_k[i]) << "A_k[" << i << "]";
    }
}

}  // namespace
}  // namespace gradmix
