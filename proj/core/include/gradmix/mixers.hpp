#pragma once

#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gradmix/vec_ops.hpp"

namespace gradmix {

/// Per-step inputs to a mixing strategy: the current-task gradient and loss,
/// plus the reference gradient and loss computed on episodic memory.
struct MixInputs {
    std::span<const double> g;
    double loss_t = 0.0;
    std::span<const double> g_ref;
    double loss_ref = 0.0;
};

/// Geometry recorded alongside each decision. Fields are NaN where the
/// quantity is undefined for the step.
struct MixDiagnostics {
    double theta_tilde = std::numeric_limits<double>::quiet_NaN();  // angle(g, g_ref)
    double theta = std::numeric_limits<double>::quiet_NaN();        // angle(mixed, g)
    double k1 = std::numeric_limits<double>::quiet_NaN();           // loss_t / loss_ref
    double k2 = std::numeric_limits<double>::quiet_NaN();           // ||g|| / ||g_ref||
    double cos_theta1 = std::numeric_limits<double>::quiet_NaN();
    double cos_theta2 = std::numeric_limits<double>::quiet_NaN();
    bool zero_current_grad = false;  // g = 0 while g_ref != 0 (no defined rotation)
};

/// Outcome of one strategy invocation. For the scalar strategies
/// mixed = alpha1 * g + alpha2 * g_ref; for GEM mixed = g + sum_k v_k g_k and
/// gem_v holds the dual solution.
struct MixDecision {
    double alpha1 = 1.0;
    double alpha2 = 0.0;
    std::vector<double> gem_v;
    Vec mixed;
    std::optional<MixDiagnostics> diagnostics;
};

/// Plain sequential SGD: mixed = g, no diagnostics.
MixDecision mix_van(const MixInputs& in);

/// Averaged-reference projection: pass g through when g'g_ref > 0, otherwise
/// remove the obtuse component so mixed'g_ref = 0.
MixDecision mix_agem(const MixInputs& in);

/// Per-task constrained projection: mixed'g_k >= 0 for every past task's
/// reference gradient, via the dual nonnegative QP. Throws QpConvergenceError
/// if the solver fails or the recovered gradient violates the constraints
/// beyond 1e-7 * ||g||.
MixDecision mix_gem(std::span<const double> g, const std::vector<Vec>& ref_grads,
                    int qp_max_iters = 10000, double qp_tol = -1.0);

/// Loss-ratio rule: above the sensitivity threshold epsilon the reference
/// weight is loss_ref / loss_t; at or below it the update defers fully to
/// memory.
MixDecision mix_mega1(const MixInputs& in, double epsilon);

/// Rotation angle maximizing k*cos(beta) + cos(theta_tilde - beta) over
/// beta in [0, pi]. k may be +infinity (zero reference loss). Throws
/// std::domain_error when theta_tilde is outside [0, pi] or k is negative/NaN.
double mega2_angle(double k, double theta_tilde);

/// Coefficients (a, b) such that a*g + b*g_ref has the magnitude of g and
/// sits at angle theta from g (rotated toward g_ref). Singular geometry
/// (parallel vectors or zero g_ref) yields (1, 0).
std::pair<double, double> solve_coefficients(std::span<const double> g,
                                             std::span<const double> g_ref, double theta);

/// Magnitude-preserving rotation of g toward g_ref by the closed-form angle.
MixDecision mix_mega2(const MixInputs& in);

/// Closed forms of cos(theta1) and cos(theta2) as functions of the loss ratio
/// k1, the gradient-norm ratio k2, and theta_tilde in (0, pi). Throws
/// std::domain_error if a denominator vanishes.
std::pair<double, double> cos_theta_closed_forms(double k1, double k2, double theta_tilde);

}  // namespace gradmix
