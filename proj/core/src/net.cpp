#include "gradmix/net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gradmix/errors.hpp"
#include "gradmix/rng.hpp"

namespace gradmix {

namespace {

// Offsets of each weight matrix / bias vector inside the flat vector.
struct Layout {
    struct Block {
        int w_off;   // start of row-major (fan_in x fan_out) matrix
        int b_off;   // start of bias vector
        int in;
        int out;
    };
    std::vector<Block> trunk;
    std::vector<Block> head;  // one block per head
    int total = 0;
};

Layout make_layout(const NetworkSpec& spec) {
    Layout lay;
    int off = 0;
    int in = spec.input_dim;
    for (int h : spec.hidden_dims) {
        lay.trunk.push_back({off, off + in * h, in, h});
        off += in * h + h;
        in = h;
    }
    for (int h = 0; h < spec.heads; ++h) {
        lay.head.push_back({off, off + in * spec.classes_per_head, in, spec.classes_per_head});
        off += in * spec.classes_per_head + spec.classes_per_head;
    }
    lay.total = off;
    return lay;
}

// Forward one example through the trunk and the selected head. Activations
// (post-ReLU) per trunk layer are stored for backprop when acts != nullptr.
// Returns false if any value is non-finite.
bool forward_one(const NetworkSpec& spec, const Layout& lay, const Vec& w,
                 const double* x, int head, std::vector<Vec>* acts, Vec& logits) {
    thread_local Vec cur;
    cur.assign(x, x + spec.input_dim);
    if (acts) acts->clear();
    for (const auto& blk : lay.trunk) {
        Vec next(blk.out, 0.0);
        for (int i = 0; i < blk.in; ++i) {
            const double xi = cur[i];
            if (xi == 0.0) continue;
            const double* row = &w[blk.w_off + i * blk.out];
            for (int j = 0; j < blk.out; ++j) next[j] += xi * row[j];
        }
        for (int j = 0; j < blk.out; ++j) {
            next[j] += w[blk.b_off + j];
            if (next[j] < 0.0) next[j] = 0.0;  // relu
            if (!std::isfinite(next[j])) return false;
        }
        cur = std::move(next);
        if (acts) acts->push_back(cur);
    }
    const auto& hb = lay.head[head];
    logits.assign(hb.out, 0.0);
    for (int i = 0; i < hb.in; ++i) {
        const double xi = cur[i];
        if (xi == 0.0) continue;
        const double* row = &w[hb.w_off + i * hb.out];
        for (int j = 0; j < hb.out; ++j) logits[j] += xi * row[j];
    }
    for (int j = 0; j < hb.out; ++j) {
        logits[j] += w[hb.b_off + j];
        if (!std::isfinite(logits[j])) return false;
    }
    return true;
}

// Stable softmax probabilities and cross-entropy for one label, fused so the
// log never sees zero.
double softmax_xent(const Vec& logits, int label, Vec& probs) {
    double mx = logits[0];
    for (double z : logits) mx = std::max(mx, z);
    double sum = 0.0;
    probs.resize(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) {
        probs[j] = std::exp(logits[j] - mx);
        sum += probs[j];
    }
    for (double& p : probs) p /= sum;
    return std::log(sum) - (logits[label] - mx);
}

int argmax_lowest_tie(const Vec& v) {
    int best = 0;
    for (int j = 1; j < static_cast<int>(v.size()); ++j) {
        if (v[j] > v[best]) best = j;
    }
    return best;
}

}  // namespace

int NetworkSpec::trunk_out_dim() const {
    return hidden_dims.empty() ? input_dim : hidden_dims.back();
}

int NetworkSpec::param_count() const {
    int d = 0;
    int in = input_dim;
    for (int h : hidden_dims) {
        d += in * h + h;
        in = h;
    }
    d += heads * (in * classes_per_head + classes_per_head);
    return d;
}

void NetworkSpec::validate() const {
    if (input_dim <= 0) throw std::invalid_argument("input_dim must be positive");
    for (int h : hidden_dims) {
        if (h <= 0) throw std::invalid_argument("hidden dims must be positive");
    }
    if (heads < 1) throw std::invalid_argument("need at least one head");
    if (classes_per_head <= 0) throw std::invalid_argument("classes_per_head must be positive");
}

Vec init_params(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    const Layout lay = make_layout(spec);
    Vec w(lay.total, 0.0);
    Rng rng(seed);
    auto fill_block = [&](const Layout::Block& blk) {
        const double bound = std::sqrt(6.0 / (blk.in + blk.out));
        for (int i = 0; i < blk.in * blk.out; ++i) {
            w[blk.w_off + i] = rng.uniform(-bound, bound);
        }
        // biases stay zero
    };
    for (const auto& blk : lay.trunk) fill_block(blk);
    for (const auto& blk : lay.head) fill_block(blk);
    return w;
}

LossGrad loss_and_grad(const NetworkSpec& spec, const Vec& w, const Batch& batch) {
    spec.validate();
    const Layout lay = make_layout(spec);
    if (static_cast<int>(w.size()) != lay.total) {
        throw std::invalid_argument("parameter vector length mismatch");
    }
    if (batch.size() < 1) throw std::invalid_argument("empty batch");
    if (batch.head < 0 || batch.head >= spec.heads) {
        throw std::invalid_argument("batch head out of range");
    }
    if (static_cast<int>(batch.inputs.size()) != batch.size() * spec.input_dim) {
        throw std::invalid_argument("batch input size mismatch");
    }

    const int n = batch.size();
    const double inv_n = 1.0 / n;
    LossGrad out;
    out.grad.assign(lay.total, 0.0);

    std::vector<Vec> acts;
    Vec logits, probs, delta, delta_prev;
    const auto& hb = lay.head[batch.head];

    for (int e = 0; e < n; ++e) {
        const double* x = &batch.inputs[static_cast<std::size_t>(e) * spec.input_dim];
        const int y = batch.labels[e];
        if (y < 0 || y >= spec.classes_per_head) {
            throw std::invalid_argument("label out of range for head");
        }
        if (!forward_one(spec, lay, w, x, batch.head, &acts, logits)) {
            throw NumericOverflowError("non-finite activation at example " + std::to_string(e));
        }
        out.loss += inv_n * softmax_xent(logits, y, probs);

        // dL/dlogits = (p - onehot) / n
        delta = probs;
        delta[y] -= 1.0;
        for (double& v : delta) v *= inv_n;

        // head block
        const double* last = lay.trunk.empty() ? x : acts.back().data();
        for (int i = 0; i < hb.in; ++i) {
            const double ai = last[i];
            if (ai != 0.0) {
                double* grow = &out.grad[hb.w_off + i * hb.out];
                for (int j = 0; j < hb.out; ++j) grow[j] += ai * delta[j];
            }
        }
        for (int j = 0; j < hb.out; ++j) out.grad[hb.b_off + j] += delta[j];

        // delta back into the trunk: masked by relu derivative as we go
        delta_prev.assign(hb.in, 0.0);
        for (int i = 0; i < hb.in; ++i) {
            const double* row = &w[hb.w_off + i * hb.out];
            double s = 0.0;
            for (int j = 0; j < hb.out; ++j) s += row[j] * delta[j];
            delta_prev[i] = s;
        }

        for (int l = static_cast<int>(lay.trunk.size()) - 1; l >= 0; --l) {
            const auto& blk = lay.trunk[l];
            // relu mask: post-activation zero means the unit was clamped
            for (int j = 0; j < blk.out; ++j) {
                if (acts[l][j] == 0.0) delta_prev[j] = 0.0;
            }
            const double* below = (l == 0) ? x : acts[l - 1].data();
            for (int i = 0; i < blk.in; ++i) {
                const double ai = below[i];
                if (ai != 0.0) {
                    double* grow = &out.grad[blk.w_off + i * blk.out];
                    for (int j = 0; j < blk.out; ++j) grow[j] += ai * delta_prev[j];
                }
            }
            for (int j = 0; j < blk.out; ++j) out.grad[blk.b_off + j] += delta_prev[j];

            if (l > 0) {
                delta.assign(blk.in, 0.0);
                for (int i = 0; i < blk.in; ++i) {
                    const double* row = &w[blk.w_off + i * blk.out];
                    double s = 0.0;
                    for (int j = 0; j < blk.out; ++j) s += row[j] * delta_prev[j];
                    delta[i] = s;
                }
                delta_prev = delta;
            }
        }
    }

    if (!std::isfinite(out.loss)) {
        throw NumericOverflowError("non-finite loss");
    }
    return out;
}

Vec sgd_step(const Vec& w, const Vec& mixed_grad, double lr) {
    if (w.size() != mixed_grad.size()) {
        throw std::invalid_argument("sgd_step length mismatch");
    }
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
    Vec next(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) next[i] = w[i] - lr * mixed_grad[i];
    return next;
}

double evaluate(const NetworkSpec& spec, const Vec& w, const std::vector<Batch>& test_batches) {
    spec.validate();
    const Layout lay = make_layout(spec);
    long correct = 0;
    long total = 0;
    Vec logits;
    for (const auto& b : test_batches) {
        for (int e = 0; e < b.size(); ++e) {
            const double* x = &b.inputs[static_cast<std::size_t>(e) * spec.input_dim];
            if (!forward_one(spec, lay, w, x, b.head, nullptr, logits)) {
                throw NumericOverflowError("non-finite activation during evaluation");
            }
            if (argmax_lowest_tie(logits) == b.labels[e]) ++correct;
            ++total;
        }
    }
    if (total == 0) throw std::invalid_argument("empty test set");
    return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace gradmix
