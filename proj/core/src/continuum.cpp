#include "gradmix/continuum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gradmix/errors.hpp"
#include "gradmix/mixers.hpp"
#include "gradmix/rng.hpp"
#include "gradmix/text_io.hpp"

namespace gradmix {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kEvalChunk = 256;

// rng stream ids within a run
enum RunSeedPurpose : std::uint64_t {
    kMemorySeed = 101,
    kShuffleSeed = 102,
    kRefSampleSeed = 103,
    kPoolShuffleSeed = 104,
};

struct RefEstimate {
    double loss = 0.0;
    Vec grad;
};

// Mean loss/gradient over a set of head-routed batches, weighted by batch size.
RefEstimate combined_loss_grad(const NetworkSpec& spec, const Vec& w,
                               const std::vector<Batch>& groups) {
    RefEstimate est;
    est.grad.assign(w.size(), 0.0);
    long total = 0;
    for (const auto& b : groups) total += b.size();
    for (const auto& b : groups) {
        const LossGrad lg = loss_and_grad(spec, w, b);
        const double wgt = static_cast<double>(b.size()) / static_cast<double>(total);
        est.loss += wgt * lg.loss;
        axpy(wgt, lg.grad, est.grad);
    }
    return est;
}

void validate_stream(const NetworkSpec& spec, const std::vector<TaskSpec>& stream) {
    if (stream.empty()) throw std::invalid_argument("empty task stream");
    for (const auto& t : stream) {
        if (t.head < 0 || t.head >= spec.heads) {
            throw std::invalid_argument("task head exceeds network head count");
        }
    }
}

TraceRow make_trace_row(long step, int task, double loss_t, double g_norm,
                        const MixDecision& dec, double loss_ref, double gref_norm) {
    TraceRow row;
    row.step = step;
    row.task = task;
    row.loss_t = loss_t;
    row.loss_ref = loss_ref;
    row.g_norm = g_norm;
    row.gref_norm = gref_norm;
    if (dec.diagnostics) {
        row.theta_tilde = dec.diagnostics->theta_tilde;
        row.theta = dec.diagnostics->theta;
        row.k1 = dec.diagnostics->k1;
        row.k2 = dec.diagnostics->k2;
    } else {
        row.theta_tilde = row.theta = row.k1 = row.k2 = kNaN;
    }
    return row;
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::van: return "van";
        case Method::gem: return "gem";
        case Method::agem: return "agem";
        case Method::mega1: return "mega1";
        case Method::mega2: return "mega2";
        case Method::multitask: return "multitask";
    }
    throw std::logic_error("unknown method");
}

Method parse_method(std::string_view name) {
    if (name == "van") return Method::van;
    if (name == "gem") return Method::gem;
    if (name == "agem") return Method::agem;
    if (name == "mega1") return Method::mega1;
    if (name == "mega2") return Method::mega2;
    if (name == "multitask") return Method::multitask;
    throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

std::uint64_t task_shuffle_seed(std::uint64_t run_seed, int task_pos) {
    return derive_seed(derive_seed(run_seed, kShuffleSeed), static_cast<std::uint64_t>(task_pos));
}

void RunConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (ref_batch_size < 1) throw std::invalid_argument("ref_batch_size must be >= 1");
    if (mem_capacity < 1) throw std::invalid_argument("mem_capacity must be >= 1");
    if (eval_batches < 0) throw std::invalid_argument("eval_batches must be >= 0");
    if (method == Method::mega1 && !(epsilon > 0.0)) {
        throw std::invalid_argument("mega1 requires a positive epsilon");
    }
}

RunResult run_continuum(const NetworkSpec& spec, const std::vector<TaskSpec>& stream,
                        const RunConfig& cfg, const TraceCallback& on_step) {
    cfg.validate();
    spec.validate();
    validate_stream(spec, stream);
    if (cfg.method == Method::multitask) return run_multitask(spec, stream, cfg, on_step);

    const int T = static_cast<int>(stream.size());
    RunResult res;
    Vec w = init_params(spec, cfg.seed);
    EpisodicMemory memory(cfg.mem_capacity, derive_seed(cfg.seed, kMemorySeed),
                          cfg.memory_mode);
    Rng ref_rng(derive_seed(cfg.seed, kRefSampleSeed));

    // test batches materialized once per task
    std::vector<std::vector<Batch>> test_batches(T);
    for (int t = 0; t < T; ++t) {
        test_batches[t] = stream[t].test.chunked(kEvalChunk, t, stream[t].head);
    }

    long step = 0;
    for (int t = 0; t < T; ++t) {
        const TaskSpec& task = stream[t];
        const int k = t + 1;
        const int n = task.train.size();
        const int n_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
        res.matrix.set_task_batches(k, n_batches);

        // zero-shot evaluation before the first update of this task
        res.matrix.record(k, 0, k, evaluate(spec, w, test_batches[t]));

        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        {
            Rng shuffle_rng(task_shuffle_seed(cfg.seed, t));
            shuffle_rng.shuffle(order);
        }

        for (int b = 1; b <= n_batches; ++b) {
            const int lo = (b - 1) * cfg.batch_size;
            const int hi = std::min(n, b * cfg.batch_size);
            const Batch batch = task.train.gather(
                std::span<const int>(order.data() + lo, static_cast<std::size_t>(hi - lo)), t,
                task.head);

            LossGrad lg;
            try {
                lg = loss_and_grad(spec, w, batch);
            } catch (const NumericOverflowError& e) {
                throw NumericOverflowError(std::string(e.what()) + " (run aborted at step " +
                                           std::to_string(step) + ")");
            }
            const double g_norm = norm(lg.grad);

            MixDecision dec;
            double loss_ref = kNaN;
            double gref_norm = kNaN;
            if (cfg.method == Method::van) {
                dec = mix_van({lg.grad, lg.loss, {}, 0.0});
            } else if (cfg.method == Method::gem) {
                const auto refs = per_task_ref_grads(memory, spec, w, t);
                if (refs.empty()) {
                    dec = mix_van({lg.grad, lg.loss, {}, 0.0});
                } else {
                    std::vector<Vec> grads;
                    grads.reserve(refs.size());
                    double loss_sum = 0.0;
                    Vec gref_mean(w.size(), 0.0);
                    for (const auto& r : refs) {
                        grads.push_back(r.grad);
                        loss_sum += r.loss;
                        axpy(1.0 / refs.size(), r.grad, gref_mean);
                    }
                    dec = mix_gem(lg.grad, grads);
                    // diagnostics relative to the mean reference
                    loss_ref = loss_sum / refs.size();
                    gref_norm = norm(gref_mean);
                    MixDiagnostics diag;
                    const double nr = gref_norm;
                    if (g_norm > 0.0 && nr > 0.0) {
                        diag.theta_tilde = angle_between(lg.grad, gref_mean);
                        diag.k2 = g_norm / nr;
                    }
                    diag.k1 = (loss_ref > 0.0) ? lg.loss / loss_ref : kNaN;
                    if (norm(dec.mixed) > 0.0 && g_norm > 0.0) {
                        diag.theta = angle_between(dec.mixed, lg.grad);
                    }
                    dec.diagnostics = diag;
                }
            } else {
                // agem / mega1 / mega2 share the averaged-reference estimate
                auto groups = memory.sample_ref_batch(t, cfg.ref_batch_size, ref_rng);
                if (!groups) {
                    dec = mix_van({lg.grad, lg.loss, {}, 0.0});
                } else {
                    const RefEstimate ref = combined_loss_grad(spec, w, *groups);
                    loss_ref = ref.loss;
                    gref_norm = norm(ref.grad);
                    const MixInputs in{lg.grad, lg.loss, ref.grad, ref.loss};
                    switch (cfg.method) {
                        case Method::agem: dec = mix_agem(in); break;
                        case Method::mega1: dec = mix_mega1(in, cfg.epsilon); break;
                        case Method::mega2: dec = mix_mega2(in); break;
                        default: throw std::logic_error("unreachable");
                    }
                }
            }

            w = sgd_step(w, dec.mixed, cfg.lr);
            res.trace.push_back(make_trace_row(step, t, lg.loss, g_norm, dec, loss_ref, gref_norm));
            if (on_step) on_step(res.trace.back());
            ++step;

            // memory is appended after the update
            for (int e = 0; e < batch.size(); ++e) {
                std::vector<double> input(
                    batch.inputs.begin() + static_cast<std::size_t>(e) * spec.input_dim,
                    batch.inputs.begin() + static_cast<std::size_t>(e + 1) * spec.input_dim);
                memory.offer(t, task.head, std::move(input), batch.labels[e]);
            }

            if (b <= cfg.eval_batches) {
                res.matrix.record(k, b, k, evaluate(spec, w, test_batches[t]));
            }
        }

        for (int j = 1; j <= k; ++j) {
            res.matrix.record(k, n_batches, j, evaluate(spec, w, test_batches[j - 1]));
        }
    }

    res.report.a_T = average_accuracy(res.matrix, T);
    res.report.f_T = (T >= 2) ? forgetting(res.matrix, T) : kNaN;
    int beta = cfg.eval_batches;
    for (int k = 1; k <= T; ++k) beta = std::min(beta, res.matrix.task_batches(k));
    res.report.lca_beta = beta;
    res.report.lca = lca(res.matrix, beta, T);
    res.final_params = std::move(w);
    return res;
}

RunResult run_multitask(const NetworkSpec& spec, const std::vector<TaskSpec>& stream,
                        const RunConfig& cfg, const TraceCallback& on_step) {
    cfg.validate();
    spec.validate();
    validate_stream(spec, stream);

    if (stream.size() == 1) {
        RunConfig c = cfg;
        c.method = Method::van;
        return run_continuum(spec, stream, c, on_step);
    }

    const int T = static_cast<int>(stream.size());
    RunResult res;
    Vec w = init_params(spec, cfg.seed);

    // pooled (task, example) pairs, one seed-derived shuffle
    std::vector<std::pair<int, int>> pool;
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < stream[t].train.size(); ++i) pool.emplace_back(t, i);
    }
    {
        Rng rng(derive_seed(cfg.seed, kPoolShuffleSeed));
        rng.shuffle(pool);
    }

    const int n = static_cast<int>(pool.size());
    const int n_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
    long step = 0;
    std::vector<int> idxs;
    for (int b = 1; b <= n_batches; ++b) {
        const int lo = (b - 1) * cfg.batch_size;
        const int hi = std::min(n, b * cfg.batch_size);

        // group the minibatch per task so each sub-batch routes one head
        std::map<int, std::vector<int>> by_task;
        for (int p = lo; p < hi; ++p) by_task[pool[p].first].push_back(pool[p].second);
        std::vector<Batch> groups;
        for (const auto& [t, list] : by_task) {
            groups.push_back(stream[t].train.gather(list, t, stream[t].head));
        }
        RefEstimate est;
        try {
            est = combined_loss_grad(spec, w, groups);
        } catch (const NumericOverflowError& e) {
            throw NumericOverflowError(std::string(e.what()) + " (run aborted at step " +
                                       std::to_string(step) + ")");
        }
        w = sgd_step(w, est.grad, cfg.lr);

        TraceRow row;
        row.step = step;
        row.task = -1;
        row.loss_t = est.loss;
        row.g_norm = norm(est.grad);
        row.loss_ref = row.gref_norm = row.theta_tilde = row.theta = row.k1 = row.k2 = kNaN;
        res.trace.push_back(row);
        if (on_step) on_step(res.trace.back());
        ++step;
    }

    res.matrix.set_task_batches(T, n_batches);
    for (int j = 1; j <= T; ++j) {
        const auto batches = stream[j - 1].test.chunked(kEvalChunk, j - 1, stream[j - 1].head);
        res.matrix.record(T, n_batches, j, evaluate(spec, w, batches));
    }
    res.report.a_T = average_accuracy(res.matrix, T);
    res.report.f_T = kNaN;   // no sequential checkpoints to forget from
    res.report.lca = kNaN;
    res.report.lca_beta = 0;
    res.final_params = std::move(w);
    return res;
}

double search_epsilon(const NetworkSpec& spec, const std::vector<TaskSpec>& cv_tasks,
                      const std::vector<double>& grid, const RunConfig& cfg) {
    if (cv_tasks.empty()) throw std::invalid_argument("empty cross-validation segment");
    if (grid.empty()) throw std::invalid_argument("empty epsilon grid");

    std::vector<double> sorted = grid;
    std::sort(sorted.begin(), sorted.end());

    double best_eps = sorted.front();
    double best_acc = -1.0;
    for (double eps : sorted) {
        RunConfig c = cfg;
        c.method = Method::mega1;
        c.epsilon = eps;
        const RunResult r = run_continuum(spec, cv_tasks, c);
        if (r.report.a_T > best_acc) {
            best_acc = r.report.a_T;
            best_eps = eps;
        }
    }
    return best_eps;
}

std::string trace_to_csv(const std::vector<TraceRow>& trace) {
    std::ostringstream out;
    out << "step,task,loss_t,loss_ref,g_norm,gref_norm,theta_tilde,theta,k1,k2\n";
    for (const auto& r : trace) {
        out << r.step << ',' << r.task << ',' << format_double(r.loss_t) << ','
            << format_double(r.loss_ref) << ',' << format_double(r.g_norm) << ','
            << format_double(r.gref_norm) << ',' << format_double(r.theta_tilde) << ','
            << format_double(r.theta) << ',' << format_double(r.k1) << ','
            << format_double(r.k2) << '\n';
    }
    return out.str();
}

std::vector<TraceRow> trace_from_csv(const std::string& text) {
    std::vector<TraceRow> rows;
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
        if (cols.size() != 10) throw std::runtime_error("bad trace row: " + line);
        TraceRow r;
        r.step = static_cast<long>(parse_double(trim(cols[0])));
        r.task = static_cast<int>(parse_double(trim(cols[1])));
        r.loss_t = parse_double(trim(cols[2]));
        r.loss_ref = parse_double(trim(cols[3]));
        r.g_norm = parse_double(trim(cols[4]));
        r.gref_norm = parse_double(trim(cols[5]));
        r.theta_tilde = parse_double(trim(cols[6]));
        r.theta = parse_double(trim(cols[7]));
        r.k1 = parse_double(trim(cols[8]));
        r.k2 = parse_double(trim(cols[9]));
        rows.push_back(r);
    }
    return rows;
}

}  // namespace gradmix
