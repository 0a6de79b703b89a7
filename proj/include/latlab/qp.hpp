#pragma once

#include "latlab/types.hpp"

namespace latlab::ctrl {

/// Box-constrained QP  min 1/2 x'Hx + g'x,  lo <= x <= hi, with optional
/// bounds on consecutive differences  rate_lo <= x_{i+1} - x_i <= rate_hi.
struct QpProblem {
    Mat H;
    Vec g;
    Vec lo, hi;
    Vec rate_lo, rate_hi;  ///< size n-1 when has_rate
    bool has_rate = false;

    void validate() const;
};

struct QpResult {
    Vec x;
    bool converged = false;
    int iterations = 0;
    double kkt_residual = 0.0;  ///< max of stationarity, complementarity, feasibility
};

/// Primal/dual state carried between related solves (receding horizon).
struct QpWarmState {
    Vec x, u1, u2;
    double rho = 0.0;
};

/// ADMM with the rate constraints handled through an auxiliary variable
/// z = [x; Dx]; terminates when primal and dual residuals drop below tol.
/// The objective is normalized by the mean Hessian diagonal internally, so
/// tol acts on the unit-scaled problem.
QpResult qp_solve(const QpProblem& qp, double tol = 1e-6, int max_iter = 20000,
                  QpWarmState* warm = nullptr);

}  // namespace latlab::ctrl
