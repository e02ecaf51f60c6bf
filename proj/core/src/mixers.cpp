#include "gradmix/mixers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gradmix/errors.hpp"
#include "gradmix/nqp.hpp"

namespace gradmix {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

Vec combine(double a1, std::span<const double> g, double a2, std::span<const double> g_ref) {
    Vec out(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        out[i] = a1 * g[i] + (g_ref.empty() ? 0.0 : a2 * g_ref[i]);
    }
    return out;
}

// Common diagnostics for the single-reference strategies.
MixDiagnostics base_diag(const MixInputs& in) {
    MixDiagnostics d;
    const double ng = norm(in.g);
    const double nr = norm(in.g_ref);
    if (ng > 0.0 && nr > 0.0) d.theta_tilde = angle_between(in.g, in.g_ref);
    d.k1 = (in.loss_ref > 0.0) ? in.loss_t / in.loss_ref : (in.loss_t > 0.0 ? kInf : kNaN);
    d.k2 = (nr > 0.0) ? ng / nr : (ng > 0.0 ? kInf : kNaN);
    return d;
}

void fill_achieved_theta(MixDiagnostics& d, std::span<const double> mixed,
                         std::span<const double> g) {
    if (norm(mixed) > 0.0 && norm(g) > 0.0) d.theta = angle_between(mixed, g);
}

}  // namespace

MixDecision mix_van(const MixInputs& in) {
    MixDecision dec;
    dec.alpha1 = 1.0;
    dec.alpha2 = 0.0;
    dec.mixed.assign(in.g.begin(), in.g.end());
    return dec;
}

MixDecision mix_agem(const MixInputs& in) {
    MixDecision dec;
    dec.alpha1 = 1.0;
    MixDiagnostics diag = base_diag(in);

    const double rr = in.g_ref.empty() ? 0.0 : dot(in.g_ref, in.g_ref);
    if (rr == 0.0) {
        dec.alpha2 = 0.0;
        dec.mixed.assign(in.g.begin(), in.g.end());
    } else {
        const double d = dot(in.g, in.g_ref);
        if (d > 0.0) {
            dec.alpha2 = 0.0;
            dec.mixed.assign(in.g.begin(), in.g.end());
        } else {
            dec.alpha2 = -d / rr;
            dec.mixed = combine(1.0, in.g, dec.alpha2, in.g_ref);
        }
    }
    fill_achieved_theta(diag, dec.mixed, in.g);
    dec.diagnostics = diag;
    return dec;
}

MixDecision mix_gem(std::span<const double> g, const std::vector<Vec>& ref_grads,
                    int qp_max_iters, double qp_tol) {
    MixDecision dec;
    dec.alpha1 = 1.0;
    const int m = static_cast<int>(ref_grads.size());
    dec.gem_v.assign(m, 0.0);
    dec.mixed.assign(g.begin(), g.end());
    if (m == 0) return dec;

    std::vector<double> dots(m);
    bool violated = false;
    for (int k = 0; k < m; ++k) {
        dots[k] = dot(g, ref_grads[k]);
        if (dots[k] < 0.0) violated = true;
    }
    if (!violated) return dec;

    // Dual of: min 1/2 ||g - x||^2  s.t.  x'g_k >= 0.
    // Stationarity gives x = g + sum_k v_k g_k with v >= 0 minimizing
    // 1/2 v'Hv + h'v, H the Gram matrix of the references and h_k = g_k'g.
    // Scaled by 2 to fit the solver's v'Qv + c'v form.
    NqpProblem p;
    p.c.resize(m);
    p.Q.assign(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) {
        p.c[i] = 2.0 * dots[i];
        for (int j = i; j < m; ++j) {
            const double q = dot(ref_grads[i], ref_grads[j]);
            p.Q[static_cast<std::size_t>(i) * m + j] = q;
            p.Q[static_cast<std::size_t>(j) * m + i] = q;
        }
    }
    NqpSolution sol = solve_nqp(p, qp_max_iters, qp_tol);
    dec.gem_v = sol.v;
    for (int k = 0; k < m; ++k) {
        if (sol.v[k] != 0.0) axpy(sol.v[k], ref_grads[k], dec.mixed);
    }

    const double ctol = 1e-7 * norm(g);
    for (int k = 0; k < m; ++k) {
        const double c = dot(dec.mixed, ref_grads[k]);
        if (c < -ctol) {
            throw QpConvergenceError(
                "gem projection violates constraint " + std::to_string(k), -c);
        }
    }
    return dec;
}

MixDecision mix_mega1(const MixInputs& in, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    MixDecision dec;
    if (in.loss_t > epsilon) {
        dec.alpha1 = 1.0;
        dec.alpha2 = (in.loss_ref == 0.0) ? 0.0 : in.loss_ref / in.loss_t;
    } else if (in.loss_t == 0.0 && in.loss_ref == 0.0) {
        // no learning signal on either side
        dec.alpha1 = 1.0;
        dec.alpha2 = 0.0;
    } else {
        dec.alpha1 = 0.0;
        dec.alpha2 = 1.0;
    }
    dec.mixed = combine(dec.alpha1, in.g, dec.alpha2, in.g_ref);

    MixDiagnostics diag = base_diag(in);
    if (diag.theta_tilde > 0.0 && diag.theta_tilde < kPi && std::isfinite(diag.k1) &&
        std::isfinite(diag.k2)) {
        auto [c1, c2] = cos_theta_closed_forms(diag.k1, diag.k2, diag.theta_tilde);
        diag.cos_theta1 = c1;
        diag.cos_theta2 = c2;
    }
    fill_achieved_theta(diag, dec.mixed, in.g);
    dec.diagnostics = diag;
    return dec;
}

double mega2_angle(double k, double theta_tilde) {
    if (!(theta_tilde >= 0.0 && theta_tilde <= kPi)) {
        throw std::domain_error("theta_tilde outside [0, pi]");
    }
    if (std::isnan(k) || k < 0.0) throw std::domain_error("k must be >= 0 or +inf");
    if (std::isinf(k)) return 0.0;
    if (theta_tilde == 0.0) return 0.0;
    if (theta_tilde == kPi) {
        // objective degenerates to (k - 1) cos(beta)
        if (k > 1.0) return 0.0;
        if (k < 1.0) return kPi;
        return kPi / 2.0;
    }
    if (k == 0.0) return theta_tilde;
    const double alpha = std::atan((k + std::cos(theta_tilde)) / std::sin(theta_tilde));
    return kPi / 2.0 - alpha;
}

std::pair<double, double> solve_coefficients(std::span<const double> g,
                                             std::span<const double> g_ref, double theta) {
    const double gg = dot(g, g);
    if (gg == 0.0) throw std::invalid_argument("solve_coefficients requires g != 0");
    const double rr = g_ref.empty() ? 0.0 : dot(g_ref, g_ref);
    const double gr = g_ref.empty() ? 0.0 : dot(g, g_ref);
    const double det = gg * rr - gr * gr;
    if (rr == 0.0 || det <= 1e-12 * gg * rr) {
        return {1.0, 0.0};  // parallel or zero reference: no plane to rotate in
    }
    const double theta_tilde = angle_between(g, g_ref);
    const double rhs1 = gg * std::cos(theta);
    const double rhs2 = std::sqrt(gg * rr) * std::cos(theta_tilde - theta);
    const double a = (rr * rhs1 - gr * rhs2) / det;
    const double b = (gg * rhs2 - gr * rhs1) / det;
    return {a, b};
}

MixDecision mix_mega2(const MixInputs& in) {
    MixDecision dec;
    MixDiagnostics diag = base_diag(in);

    const double ng = norm(in.g);
    const double nr = norm(in.g_ref);
    if (ng == 0.0) {
        // Magnitude-preserving rotation of a zero vector: emit zero, flag it.
        dec.alpha1 = 1.0;
        dec.alpha2 = 0.0;
        dec.mixed.assign(in.g.size(), 0.0);
        diag.zero_current_grad = (nr > 0.0);
        dec.diagnostics = diag;
        return dec;
    }

    if (in.loss_ref == 0.0) {
        // no forgetting signal: the mixed gradient reduces to g exactly
        dec.alpha1 = 1.0;
        dec.alpha2 = 0.0;
        dec.mixed.assign(in.g.begin(), in.g.end());
        diag.theta = 0.0;
        dec.diagnostics = diag;
        return dec;
    }

    const double k = in.loss_t / in.loss_ref;
    const double theta_tilde = (nr > 0.0) ? angle_between(in.g, in.g_ref) : 0.0;
    const double theta = mega2_angle(k, theta_tilde);
    auto [a, b] = solve_coefficients(in.g, in.g_ref, theta);
    dec.alpha1 = a;
    dec.alpha2 = b;
    dec.mixed = combine(a, in.g, b, in.g_ref);

    diag.theta = theta;
    if (theta_tilde > 0.0 && theta_tilde < kPi) {
        const double ct = std::cos(theta_tilde);
        diag.cos_theta2 = (k + ct) / std::sqrt(k * k + 2.0 * k * ct + 1.0);
    }
    dec.diagnostics = diag;
    return dec;
}

std::pair<double, double> cos_theta_closed_forms(double k1, double k2, double theta_tilde) {
    if (!(theta_tilde > 0.0 && theta_tilde < kPi)) {
        throw std::domain_error("theta_tilde must lie in (0, pi)");
    }
    if (k1 < 0.0 || k2 < 0.0) throw std::domain_error("k1 and k2 must be >= 0");
    const double ct = std::cos(theta_tilde);
    const double den2 = k1 * k1 + 2.0 * k1 * ct + 1.0;
    const double kk = k1 * k2;
    const double den1 = kk * kk + 2.0 * kk * ct + 1.0;
    if (den1 <= 0.0 || den2 <= 0.0) throw std::domain_error("degenerate denominator");
    const double cos1 = (kk + ct) / std::sqrt(den1);
    const double cos2 = (k1 + ct) / std::sqrt(den2);
    return {cos1, cos2};
}

}  // namespace gradmix
