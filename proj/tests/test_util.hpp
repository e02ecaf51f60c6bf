#pragma once

// Shared oracles and generators. Everything here is independent of the
// implementation paths it is used to check: gradients come from central
// finite differences, optima from dense grid / random search.

#include <cmath>
#include <vector>

#include "gradmix/net.hpp"
#include "gradmix/rng.hpp"
#include "gradmix/vec_ops.hpp"

namespace gradmix::test {

/// Central finite differences of the batch loss, one coordinate at a time.
inline Vec finite_difference_grad(const NetworkSpec& spec, const Vec& w, const Batch& batch,
                                  double h = 1e-5) {
    Vec fd(w.size(), 0.0);
    Vec wp = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
        wp[i] = w[i] + h;
        const double lp = loss_and_grad(spec, wp, batch).loss;
        wp[i] = w[i] - h;
        const double lm = loss_and_grad(spec, wp, batch).loss;
        wp[i] = w[i];
        fd[i] = (lp - lm) / (2.0 * h);
    }
    return fd;
}

/// Largest per-coordinate deviation between analytic and finite-difference
/// gradients, scaled by max(|fd|, |analytic|, floor). The floor absorbs the
/// finite-difference noise floor on near-zero coordinates.
inline double max_grad_rel_err(const Vec& analytic, const Vec& fd, double floor = 1e-3) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::fabs(fd[i]), std::fabs(analytic[i]), floor});
        worst = std::max(worst, std::fabs(analytic[i] - fd[i]) / denom);
    }
    return worst;
}

inline Vec random_vec(Rng& rng, int n, double scale = 1.0) {
    Vec v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

inline Batch random_batch(Rng& rng, const NetworkSpec& spec, int n, int head = 0) {
    Batch b;
    b.head = head;
    b.inputs = random_vec(rng, n * spec.input_dim);
    b.labels.resize(n);
    for (int& l : b.labels) {
        l = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.classes_per_head)));
    }
    return b;
}

/// The rotation objective of the loss-balanced angle choice.
inline double rotation_objective(double k, double theta_tilde, double beta) {
    return k * std::cos(beta) + std::cos(theta_tilde - beta);
}

struct GridMax {
    double beta = 0.0;
    double value = 0.0;
};

/// Dense argmax of the rotation objective over beta in [0, pi].
inline GridMax rotation_grid_max(double k, double theta_tilde, int points) {
    GridMax best{0.0, rotation_objective(k, theta_tilde, 0.0)};
    const double pi = 3.14159265358979323846;
    for (int i = 1; i < points; ++i) {
        const double beta = pi * i / (points - 1);
        const double v = rotation_objective(k, theta_tilde, beta);
        if (v > best.value) best = {beta, v};
    }
    return best;
}

/// A unit-norm pair (g, g_ref) in dimension n with exact angle theta_tilde
/// between them, scaled so ||g|| = norm_g and ||g_ref|| = norm_ref.
inline std::pair<Vec, Vec> vectors_at_angle(Rng& rng, int n, double theta_tilde, double norm_g,
                                            double norm_ref) {
    Vec u = random_vec(rng, n);
    scale(u, 1.0 / norm(u));
    Vec r = random_vec(rng, n);
    const double ur = dot(u, r);
    for (int i = 0; i < n; ++i) r[i] -= ur * u[i];
    scale(r, 1.0 / norm(r));
    Vec g = u;
    scale(g, norm_g);
    Vec g_ref(n);
    for (int i = 0; i < n; ++i) {
        g_ref[i] = norm_ref * (std::cos(theta_tilde) * u[i] + std::sin(theta_tilde) * r[i]);
    }
    return {g, g_ref};
}

}  // namespace gradmix::test
