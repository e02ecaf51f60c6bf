#include "gradmix/nqp.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "gradmix/errors.hpp"
#include "gradmix/vec_ops.hpp"

namespace gradmix {

namespace {

void mat_vec(const std::vector<double>& Q, int m, const std::vector<double>& v,
             std::vector<double>& out) {
    out.assign(m, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* row = &Q[static_cast<std::size_t>(i) * m];
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += row[j] * v[j];
        out[i] = s;
    }
}

double objective(const std::vector<double>& Qv, const std::vector<double>& c,
                 const std::vector<double>& v) {
    double f = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) f += v[i] * (Qv[i] + c[i]);
    return f;
}

double kkt_residual(const std::vector<double>& v, const std::vector<double>& grad, double tol) {
    double res = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double r = (v[i] <= tol) ? std::max(0.0, -grad[i]) : std::fabs(grad[i]);
        res = std::max(res, r);
    }
    return res;
}

}  // namespace

void NqpProblem::validate() const {
    const int m = dim();
    if (static_cast<int>(Q.size()) != m * m) {
        throw std::invalid_argument("Q dimension does not match c");
    }
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            const std::size_t ij = static_cast<std::size_t>(i) * m + j;
            const std::size_t ji = static_cast<std::size_t>(j) * m + i;
            if (std::fabs(Q[ij] - Q[ji]) > 1e-10 * (1.0 + std::fabs(Q[ij]))) {
                throw std::invalid_argument("Q is not symmetric");
            }
        }
    }
}

NqpSolution solve_nqp(const NqpProblem& p, int max_iters, double tol) {
    p.validate();
    const int m = p.dim();
    if (tol < 0.0) tol = 1e-9 * (1.0 + norm(p.c));

    NqpSolution sol;
    sol.v.assign(m, 0.0);
    if (m == 0) return sol;

    double q_inf = 0.0;
    for (int i = 0; i < m; ++i) {
        double row = 0.0;
        for (int j = 0; j < m; ++j) row += std::fabs(p.Q[static_cast<std::size_t>(i) * m + j]);
        q_inf = std::max(q_inf, row);
    }
    const double fallback_step = 1.0 / std::max(q_inf, 1e-12);

    std::vector<double> Qv(m, 0.0), grad(m), v_new(m), Qv_new(m), grad_new(m);
    // v = 0: gradient is just c
    grad = p.c;
    double f_cur = 0.0;
    sol.objective_trace.push_back(f_cur);

    double res = kkt_residual(sol.v, grad, tol);
    if (res <= tol) {
        sol.kkt_residual = res;
        return sol;
    }

    double bb_step = fallback_step;
    for (int iter = 1; iter <= max_iters; ++iter) {
        double step = bb_step;
        bool moved = false;
        double f_new = f_cur;
        for (int bt = 0; bt < 64; ++bt) {
            for (int i = 0; i < m; ++i) v_new[i] = std::max(0.0, sol.v[i] - step * grad[i]);
            mat_vec(p.Q, m, v_new, Qv_new);
            f_new = objective(Qv_new, p.c, v_new);
            if (f_new <= f_cur) {
                moved = (v_new != sol.v);
                break;
            }
            step *= 0.5;
        }
        if (!moved) {
            // projection fixed point; residual decides success below
            sol.iterations = iter;
            res = kkt_residual(sol.v, grad, tol);
            sol.kkt_residual = res;
            if (res <= tol) return sol;
            throw QpConvergenceError("nqp stalled with KKT residual " + std::to_string(res), res);
        }

        for (int i = 0; i < m; ++i) grad_new[i] = 2.0 * Qv_new[i] + p.c[i];

        // BB1 step from the accepted move; for the quadratic, y = 2Q s
        double ss = 0.0, sy = 0.0;
        for (int i = 0; i < m; ++i) {
            const double s = v_new[i] - sol.v[i];
            ss += s * s;
            sy += s * (grad_new[i] - grad[i]);
        }
        bb_step = (sy > 1e-300 && std::isfinite(ss / sy)) ? ss / sy : fallback_step;

        sol.v = v_new;
        grad = grad_new;
        f_cur = f_new;
        sol.objective_trace.push_back(f_cur);
        sol.iterations = iter;

        res = kkt_residual(sol.v, grad, tol);
        if (res <= tol) {
            sol.kkt_residual = res;
            return sol;
        }
    }
    throw QpConvergenceError("nqp failed to converge, KKT residual " + std::to_string(res), res);
}

}  // namespace gradmix
