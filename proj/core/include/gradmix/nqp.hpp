#pragma once

#include <vector>

namespace gradmix {

/// min_v v'Qv + c'v subject to v >= 0, with Q symmetric PSD.
/// Note the objective carries no 1/2 factor; the gradient is 2Qv + c.
struct NqpProblem {
    std::vector<double> Q;  // row-major dim x dim
    std::vector<double> c;

    int dim() const { return static_cast<int>(c.size()); }

    /// Throws std::invalid_argument if shapes disagree or Q is asymmetric
    /// beyond 1e-10.
    void validate() const;
};

struct NqpSolution {
    std::vector<double> v;
    int iterations = 0;
    double kkt_residual = 0.0;
    std::vector<double> objective_trace;  // initial value plus one entry per iteration
};

/// Projected gradient descent on the nonnegative orthant with a
/// Barzilai-Borwein step, backtracked until the objective does not increase.
/// tol < 0 selects the default 1e-9 * (1 + ||c||). Throws QpConvergenceError
/// when max_iters runs out before the KKT residual drops below tol.
NqpSolution solve_nqp(const NqpProblem& p, int max_iters = 10000, double tol = -1.0);

}  // namespace gradmix
