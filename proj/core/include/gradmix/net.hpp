#pragma once

#include <cstdint>
#include <vector>

#include "gradmix/vec_ops.hpp"

namespace gradmix {

/// Dense ReLU classifier: a shared trunk of hidden layers plus one linear
/// output matrix per head. heads == 1 is the single-head (permuted-task)
/// configuration; split-task protocols use one head per task.
struct NetworkSpec {
    int input_dim = 0;
    std::vector<int> hidden_dims;
    int heads = 1;
    int classes_per_head = 0;

    /// Total flat parameter count d. Layout: trunk W0,b0,W1,b1,... followed
    /// by per-head output matrices Wh,bh in head order. Weight matrices are
    /// row-major (fan_in x fan_out).
    int param_count() const;

    /// Width feeding the output heads (last hidden, or input_dim if no hidden).
    int trunk_out_dim() const;

    /// Throws std::invalid_argument on nonpositive dims.
    void validate() const;
};

/// One minibatch routed through a single head. `task_id` is the task
/// descriptor (indexes episodic-memory stores and accuracy rows); `head`
/// selects the output matrix.
struct Batch {
    std::vector<double> inputs;  // row-major n x input_dim
    std::vector<int> labels;
    int task_id = 0;
    int head = 0;

    int size() const { return static_cast<int>(labels.size()); }
};

struct LossGrad {
    double loss = 0.0;  // mean cross-entropy in nats
    Vec grad;           // length d; non-selected heads exactly zero
};

/// Deterministic init: weights uniform in +-sqrt(6 / (fan_in + fan_out)) per
/// matrix, biases zero.
Vec init_params(const NetworkSpec& spec, std::uint64_t seed);

/// Mean cross-entropy over the batch through batch.head, with the exact
/// analytic gradient. Throws NumericOverflowError if any activation or the
/// loss goes non-finite.
LossGrad loss_and_grad(const NetworkSpec& spec, const Vec& w, const Batch& batch);

/// w' = w - lr * mixed_grad
Vec sgd_step(const Vec& w, const Vec& mixed_grad, double lr);

/// Fraction of argmax-correct predictions over all batches (which must share
/// one head). Ties break toward the lowest class index. Throws
/// std::invalid_argument on an empty test set.
double evaluate(const NetworkSpec& spec, const Vec& w, const std::vector<Batch>& test_batches);

}  // namespace gradmix
