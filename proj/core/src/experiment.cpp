#include "gradmix/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "gradmix/svg_plot.hpp"
#include "gradmix/text_io.hpp"

namespace gradmix {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (std::string_view part : split(s, ',')) {
        part = trim(part);
        if (!part.empty()) out.emplace_back(part);
    }
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ojson num_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

Aggregate aggregate_of(const std::vector<double>& xs) {
    Aggregate a;
    a.n = static_cast<int>(xs.size());
    double sum = 0.0;
    for (double x : xs) sum += x;
    a.mean = sum / a.n;
    if (a.n >= 2) {
        double ss = 0.0;
        for (double x : xs) ss += (x - a.mean) * (x - a.mean);
        a.stddev = std::sqrt(ss / (a.n - 1));
    } else {
        a.stddev = kNaN;
    }
    return a;
}

struct RunOutcome {
    ResultRow row;
    RunResult result;
    std::vector<TraceRow> partial_trace;
    bool ok = false;
    std::string error;
};

}  // namespace

ExperimentPlan plan_from_config(const Config& cfg) {
    ExperimentPlan plan;

    const std::string kind = cfg.get("stream.kind", "synthetic");
    if (kind == "permuted") plan.stream_cfg.kind = StreamKind::permuted;
    else if (kind == "split") plan.stream_cfg.kind = StreamKind::split;
    else if (kind == "synthetic") plan.stream_cfg.kind = StreamKind::synthetic;
    else throw std::invalid_argument("unknown stream kind '" + kind + "'");

    plan.stream_cfg.num_tasks = cfg.get_int("stream.tasks", 5);
    plan.stream_cfg.examples_per_task = cfg.get_int("stream.examples_per_task", 0);
    plan.stream_cfg.cv_tasks = cfg.get_int("stream.cv_tasks", 0);
    plan.stream_cfg.seed = cfg.get_u64("stream.seed", 12345);
    plan.stream_cfg.synthetic_dim = cfg.get_int("stream.dim", 20);
    plan.stream_cfg.synthetic_classes = cfg.get_int("stream.classes", 5);
    plan.stream_cfg.synthetic_test_per_task = cfg.get_int("stream.test_per_task", 500);

    plan.hidden_dims.clear();
    for (const std::string& h : split_list(cfg.get("net.hidden", "32,32"))) {
        plan.hidden_dims.push_back(static_cast<int>(std::stol(h)));
    }

    RunConfig base;
    base.lr = cfg.get_double("run.lr", 0.1);
    base.batch_size = cfg.get_int("run.batch_size", 10);
    base.ref_batch_size = cfg.get_int("run.ref_batch_size", 256);
    base.mem_capacity = cfg.get_int("run.memory_per_task", 250);
    base.epsilon = cfg.get_double("run.epsilon", 1e-3);
    base.eval_batches = cfg.get_int("run.eval_batches", 10);
    const std::string mode = cfg.get("run.memory_mode", "reservoir");
    if (mode == "reservoir") base.memory_mode = MemoryMode::reservoir;
    else if (mode == "ring") base.memory_mode = MemoryMode::ring;
    else throw std::invalid_argument("unknown memory mode '" + mode + "'");

    std::vector<std::uint64_t> seeds;
    for (const std::string& s : split_list(cfg.get("run.seeds", "1"))) {
        seeds.push_back(static_cast<std::uint64_t>(std::stoull(s)));
    }
    std::vector<std::string> methods = split_list(cfg.get("run.methods", "van"));
    for (const std::string& m : methods) {
        const Method method = parse_method(m);
        for (std::uint64_t s : seeds) {
            RunConfig rc = base;
            rc.method = method;
            rc.seed = s;
            plan.run_cfgs.push_back(rc);
        }
    }

    plan.mnist_dir = cfg.get("data.mnist_dir", "");
    plan.base_examples = cfg.get_int("data.base_examples", 2000);

    plan.output_dir = cfg.get("output.dir", "out");
    plan.emit_plots = cfg.get_bool("output.plots", true);
    plan.emit_trace = cfg.get_bool("output.trace", false);
    plan.measure_time = cfg.get_bool("output.timing", true);
    plan.workers = cfg.get_int("output.workers", 1);
    plan.k2_bins = cfg.get_int("output.k2_bins", 40);
    return plan;
}

PreparedStream prepare_stream(const ExperimentPlan& plan) {
    PreparedStream out;
    const StreamConfig& sc = plan.stream_cfg;

    std::vector<TaskSpec> stream;
    int classes = sc.synthetic_classes;
    int input_dim = sc.synthetic_dim;
    int heads = 1;

    if (sc.kind == StreamKind::synthetic) {
        stream = make_synthetic_stream(sc);
    } else {
        SourceData base;
        if (!plan.mnist_dir.empty()) {
            const fs::path dir(plan.mnist_dir);
            base.train = std::make_shared<BaseData>(
                load_idx((dir / "train-images-idx3-ubyte").string(),
                         (dir / "train-labels-idx1-ubyte").string()));
            base.test = std::make_shared<BaseData>(
                load_idx((dir / "t10k-images-idx3-ubyte").string(),
                         (dir / "t10k-labels-idx1-ubyte").string()));
            if (plan.base_examples > 0 && plan.base_examples < base.train->size()) {
                // deterministic head of the pool; permuted tasks subsample it further
                auto sub = std::make_shared<BaseData>();
                sub->input_dim = base.train->input_dim;
                sub->num_classes = base.train->num_classes;
                sub->labels.assign(base.train->labels.begin(),
                                   base.train->labels.begin() + plan.base_examples);
                sub->inputs.assign(
                    base.train->inputs.begin(),
                    base.train->inputs.begin() +
                        static_cast<std::size_t>(plan.base_examples) * sub->input_dim);
                base.train = sub;
            }
        } else {
            // synthetic fallback pool; train and test must share cluster means
            const int test_n = sc.synthetic_test_per_task;
            BaseData pool = make_synthetic_base(plan.base_examples + test_n, sc.synthetic_dim,
                                                sc.synthetic_classes,
                                                derive_seed(sc.seed, 7001));
            auto train = std::make_shared<BaseData>();
            auto test = std::make_shared<BaseData>();
            train->input_dim = test->input_dim = pool.input_dim;
            train->num_classes = test->num_classes = pool.num_classes;
            train->labels.assign(pool.labels.begin(), pool.labels.begin() + plan.base_examples);
            train->inputs.assign(pool.inputs.begin(),
                                 pool.inputs.begin() +
                                     static_cast<std::size_t>(plan.base_examples) * pool.input_dim);
            test->labels.assign(pool.labels.begin() + plan.base_examples, pool.labels.end());
            test->inputs.assign(pool.inputs.begin() +
                                    static_cast<std::size_t>(plan.base_examples) * pool.input_dim,
                                pool.inputs.end());
            base.train = train;
            base.test = test;
        }
        input_dim = base.train->input_dim;
        if (sc.kind == StreamKind::permuted) {
            stream = make_permuted_stream(base, sc);
            classes = base.train->num_classes;
        } else {
            stream = make_split_stream(base, sc);
            classes = base.train->num_classes / sc.num_tasks;
            heads = sc.num_tasks;
        }
    }

    out.spec.input_dim = input_dim;
    out.spec.hidden_dims = plan.hidden_dims;
    out.spec.heads = heads;
    out.spec.classes_per_head = classes;
    out.spec.validate();

    auto [cv, eval] = partition_cv(stream, sc);
    out.cv_tasks = std::move(cv);
    out.eval_tasks = std::move(eval);
    return out;
}

void compute_aggregates(ResultsTable& table) {
    std::sort(table.rows.begin(), table.rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return std::tie(a.method, a.seed) < std::tie(b.method, b.seed);
    });
    table.aggregates.clear();
    std::map<std::string, std::vector<const ResultRow*>> by_method;
    for (const auto& r : table.rows) by_method[r.method].push_back(&r);
    for (const auto& [method, rows] : by_method) {
        std::vector<double> a, f, l;
        for (const ResultRow* r : rows) {
            a.push_back(r->a_T);
            f.push_back(r->f_T);
            l.push_back(r->lca);
        }
        MethodAggregates agg;
        agg.a_T = aggregate_of(a);
        agg.f_T = aggregate_of(f);
        agg.lca = aggregate_of(l);
        table.aggregates[method] = agg;
    }
}

std::string results_to_csv(const ResultsTable& table) {
    std::ostringstream out;
    out << "method,seed,A_T,F_T,LCA_10,wall_time_s\n";
    for (const auto& r : table.rows) {
        out << r.method << ',' << r.seed << ',' << format_double(r.a_T) << ','
            << format_double(r.f_T) << ',' << format_double(r.lca) << ','
            << format_double(r.wall_time_s) << '\n';
    }
    return out.str();
}

std::vector<ResultRow> results_rows_from_csv(const std::string& text) {
    std::vector<ResultRow> rows;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        const auto cols = split(sv, ',');
        if (cols.size() != 6) throw std::runtime_error("bad results row: " + line);
        ResultRow r;
        r.method = std::string(trim(cols[0]));
        r.seed = static_cast<std::uint64_t>(std::stoull(std::string(trim(cols[1]))));
        r.a_T = parse_double(trim(cols[2]));
        r.f_T = parse_double(trim(cols[3]));
        r.lca = parse_double(trim(cols[4]));
        r.wall_time_s = parse_double(trim(cols[5]));
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string metrics_to_json(const ResultsTable& table) {
    ojson root;
    root["schema"] = "gradmix-metrics-v1";
    ojson runs = ojson::array();
    for (const auto& r : table.rows) {
        ojson row;
        row["method"] = r.method;
        row["seed"] = r.seed;
        row["A_T"] = num_or_null(r.a_T);
        row["F_T"] = num_or_null(r.f_T);
        row["LCA_10"] = num_or_null(r.lca);
        row["wall_time_s"] = num_or_null(r.wall_time_s);
        runs.push_back(std::move(row));
    }
    root["runs"] = std::move(runs);

    ojson aggs;
    for (const auto& [method, agg] : table.aggregates) {
        ojson m;
        auto pack = [](const Aggregate& a) {
            ojson o;
            o["mean"] = num_or_null(a.mean);
            o["std"] = num_or_null(a.stddev);
            return o;
        };
        m["A_T"] = pack(agg.a_T);
        m["F_T"] = pack(agg.f_T);
        m["LCA_10"] = pack(agg.lca);
        m["runs"] = agg.a_T.n;
        aggs[method] = std::move(m);
    }
    root["aggregates"] = std::move(aggs);

    ojson evo;
    for (const auto& [method, a_k] : table.a_k_evolution) {
        evo[method]["A_k"] = a_k;
        auto it = table.z_b_evolution.find(method);
        if (it != table.z_b_evolution.end()) evo[method]["Z_b"] = it->second;
    }
    root["evolution"] = std::move(evo);

    if (!table.failures.empty()) root["failures"] = table.failures;
    return root.dump(2) + "\n";
}

ResultsTable run_plan(const ExperimentPlan& plan) {
    if (plan.run_cfgs.empty()) throw std::invalid_argument("plan has no runs");
    {
        // distinct seeds within each method
        std::map<std::string, std::vector<std::uint64_t>> seen;
        for (const auto& rc : plan.run_cfgs) {
            auto& v = seen[method_name(rc.method)];
            if (std::find(v.begin(), v.end(), rc.seed) != v.end()) {
                throw std::invalid_argument("duplicate seed " + std::to_string(rc.seed) +
                                            " for method " + method_name(rc.method));
            }
            v.push_back(rc.seed);
        }
    }

    const PreparedStream prepared = prepare_stream(plan);
    if (prepared.eval_tasks.empty()) {
        throw std::invalid_argument("cross-validation split left no evaluation tasks");
    }

    const int n_runs = static_cast<int>(plan.run_cfgs.size());
    std::vector<RunOutcome> outcomes(n_runs);

    std::atomic<int> next{0};
    auto worker = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n_runs) return;
            const RunConfig& rc = plan.run_cfgs[i];
            RunOutcome& oc = outcomes[i];
            oc.row.method = method_name(rc.method);
            oc.row.seed = rc.seed;
            TraceCallback sink;
            if (plan.emit_trace) {
                sink = [&oc](const TraceRow& row) { oc.partial_trace.push_back(row); };
            }
            const auto t0 = std::chrono::steady_clock::now();
            try {
                oc.result = run_continuum(prepared.spec, prepared.eval_tasks, rc, sink);
                oc.ok = true;
            } catch (const std::exception& e) {
                oc.error = e.what();
            }
            const auto t1 = std::chrono::steady_clock::now();
            if (oc.ok) {
                oc.row.a_T = oc.result.report.a_T;
                oc.row.f_T = oc.result.report.f_T;
                oc.row.lca = oc.result.report.lca;
                oc.row.wall_time_s =
                    plan.measure_time ? std::chrono::duration<double>(t1 - t0).count() : 0.0;
            }
        }
    };
    const int n_workers = std::max(1, std::min(plan.workers, n_runs));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    // merge deterministically regardless of completion order
    ResultsTable table;
    for (const auto& oc : outcomes) {
        if (oc.ok) {
            table.rows.push_back(oc.row);
        } else {
            table.failures.push_back(oc.row.method + " seed " + std::to_string(oc.row.seed) +
                                     ": " + oc.error);
        }
    }
    compute_aggregates(table);

    // evolution series (multitask has no per-task checkpoints)
    std::map<std::string, std::vector<const RunOutcome*>> by_method;
    for (const auto& oc : outcomes) {
        if (oc.ok) by_method[oc.row.method].push_back(&oc);
    }
    for (const auto& [method, runs] : by_method) {
        if (method == "multitask") continue;
        const int T = static_cast<int>(prepared.eval_tasks.size());
        std::vector<double> a_k(T, 0.0);
        int beta = std::numeric_limits<int>::max();
        for (const RunOutcome* oc : runs) beta = std::min(beta, oc->result.report.lca_beta);
        std::vector<double> z_b(beta + 1, 0.0);
        for (const RunOutcome* oc : runs) {
            for (int k = 1; k <= T; ++k) {
                a_k[k - 1] += average_accuracy(oc->result.matrix, k) / runs.size();
            }
            for (int b = 0; b <= beta; ++b) {
                double z = 0.0;
                for (int k = 1; k <= T; ++k) z += oc->result.matrix.at(k, b, k);
                z_b[b] += z / T / runs.size();
            }
        }
        table.a_k_evolution[method] = std::move(a_k);
        table.z_b_evolution[method] = std::move(z_b);
    }

    // artifacts
    const fs::path out_dir(plan.output_dir);
    fs::create_directories(out_dir);
    write_file(out_dir / "results.csv", results_to_csv(table));
    write_file(out_dir / "metrics.json", metrics_to_json(table));

    if (plan.emit_trace) {
        for (int i = 0; i < n_runs; ++i) {
            const RunOutcome& oc = outcomes[i];
            const fs::path path =
                out_dir / ("trace_" + oc.row.method + "_" + std::to_string(oc.row.seed) + ".csv");
            std::string body = trace_to_csv(oc.ok ? oc.result.trace : oc.partial_trace);
            if (!oc.ok) body += "# run failed: " + oc.error + "\n";
            write_file(path, body);
        }
    }

    if (plan.emit_plots) {
        const fs::path plot_dir = out_dir / "plots";
        fs::create_directories(plot_dir);
        if (!table.a_k_evolution.empty()) {
            write_file(plot_dir / "avg_accuracy.svg", accuracy_plot_svg(table.a_k_evolution));
        }
        if (!table.z_b_evolution.empty()) {
            write_file(plot_dir / "lca.svg", lca_plot_svg(table.z_b_evolution));
        }
        std::vector<std::vector<TraceRow>> traces;
        for (const auto& oc : outcomes) {
            if (oc.ok && !oc.result.trace.empty()) traces.push_back(oc.result.trace);
        }
        bool any_k2 = false;
        for (const auto& tr : traces) {
            for (const auto& row : tr) {
                if (!std::isnan(row.k2)) {
                    any_k2 = true;
                    break;
                }
            }
            if (any_k2) break;
        }
        if (any_k2) {
            write_file(plot_dir / "k2_hist.svg", k2_hist_svg(k2_histogram(traces, plan.k2_bins)));
        }
    }

    return table;
}

}  // namespace gradmix
