#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "gradmix/episodic_memory.hpp"
#include "gradmix/metrics.hpp"
#include "gradmix/net.hpp"
#include "gradmix/task_stream.hpp"

namespace gradmix {

enum class Method { van, gem, agem, mega1, mega2, multitask };

std::string method_name(Method m);
Method parse_method(std::string_view name);

struct RunConfig {
    Method method = Method::van;
    double lr = 0.1;
    int batch_size = 10;
    int ref_batch_size = 256;
    int mem_capacity = 250;
    double epsilon = 1e-3;  // MEGA-I sensitivity threshold
    std::uint64_t seed = 0;
    int eval_batches = 10;  // early-evaluation horizon beta
    MemoryMode memory_mode = MemoryMode::reservoir;

    void validate() const;
};

/// One per-update diagnostics row. Quantities that are undefined for the
/// step (no reference batch yet, VAN, ...) are NaN.
struct TraceRow {
    long step = 0;
    int task = 0;  // 0-based position in the stream; -1 for pooled multitask
    double loss_t = 0.0;
    double loss_ref = 0.0;
    double g_norm = 0.0;
    double gref_norm = 0.0;
    double theta_tilde = 0.0;
    double theta = 0.0;
    double k1 = 0.0;
    double k2 = 0.0;
};

struct RunReport {
    double a_T = 0.0;
    double f_T = 0.0;      // NaN when undefined (T < 2, multitask)
    double lca = 0.0;      // NaN when undefined
    int lca_beta = 0;      // horizon actually used
};

struct RunResult {
    AccuracyMatrix matrix;
    RunReport report;
    std::vector<TraceRow> trace;
    Vec final_params;
};

/// Single-pass sequential training over the given tasks with the configured
/// strategy: per minibatch, mix the current gradient with the episodic-memory
/// reference, take one SGD step, then offer the batch to memory. Evaluates
/// the current task after each of the first eval_batches updates and every
/// seen task at task end. Deterministic in (spec, stream, cfg).
/// Invoked after every update with the row just appended to the trace, so
/// callers keep a partial trace even when the run later aborts.
using TraceCallback = std::function<void(const TraceRow&)>;

RunResult run_continuum(const NetworkSpec& spec, const std::vector<TaskSpec>& stream,
                        const RunConfig& cfg, const TraceCallback& on_step = {});

/// Reference mode: all tasks' training data pooled and shuffled, one pass of
/// plain SGD, all test sets evaluated at the end.
RunResult run_multitask(const NetworkSpec& spec, const std::vector<TaskSpec>& stream,
                        const RunConfig& cfg, const TraceCallback& on_step = {});

/// Grid search for MEGA-I's epsilon on the cross-validation segment:
/// maximizes final average accuracy, ties resolved toward the smaller value.
double search_epsilon(const NetworkSpec& spec, const std::vector<TaskSpec>& cv_tasks,
                      const std::vector<double>& grid, const RunConfig& cfg);

/// Seed of the minibatch shuffle used for the task at stream position
/// `task_pos`; exposed so tooling can replay a run's exact batch schedule.
std::uint64_t task_shuffle_seed(std::uint64_t run_seed, int task_pos);

/// CSV with header step,task,loss_t,loss_ref,g_norm,gref_norm,theta_tilde,theta,k1,k2.
std::string trace_to_csv(const std::vector<TraceRow>& trace);
std::vector<TraceRow> trace_from_csv(const std::string& text);

}  // namespace gradmix
