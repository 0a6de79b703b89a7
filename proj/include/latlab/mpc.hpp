#pragma once

#include "latlab/plant.hpp"
#include "latlab/qp.hpp"
#include "latlab/track.hpp"

namespace latlab::ctrl {

/// Horizon, bounds and weights of the finite-horizon steering MPC.
struct MpcConfig {
    int horizon = 40;            ///< p
    double delta_min = -1.0;     ///< rad
    double delta_max = 1.0;      ///< rad
    double rate_max = 0.5;       ///< rad/s
    double t_s = 0.1;            ///< s
    double r_d = 1.0;            ///< weight on input and on input differences
    Vec2 q{2.5, 2.5};            ///< stage tracking weight (diagonal)
    Vec2 qf{3.5, 3.5};           ///< terminal weight (diagonal)
    double qp_tol = 1e-6;
    int qp_max_iter = 4000;

    void validate() const;
};

/// Euler-discretized bicycle model linearized at an operating point:
/// X_{k+1} ~= A X_k + B delta + c, exact at the operating point.
struct LinearModel {
    Mat A;   ///< 4x4
    Vec4 B;
    Vec4 c;
};

LinearModel linearize_model(const EgoState& x_op, double delta_op, double throttle,
                            const plant::PlantParams& params, double t_s);

/// LTV MPC over the steering sequence; condensed box+rate QP solved by ADMM.
class MpcController {
public:
    MpcController(MpcConfig cfg, plant::PlantParams params);

    /// Returns the first steering command of the optimal sequence.
    double solve(const EgoState& x_k, const track::ReferencePath& path, double throttle);

    void reset();
    double delta_prev() const { return delta_prev_; }
    int nonconverged_steps() const { return nonconverged_; }
    double last_kkt_residual() const { return last_kkt_; }

private:
    MpcConfig cfg_;
    plant::PlantParams params_;
    QpWarmState warm_;
    double delta_prev_ = 0.0;
    int nonconverged_ = 0;
    double last_kkt_ = 0.0;
};

/// Condensed QP for one MPC step (exposed for the solver oracle tests).
QpProblem build_mpc_qp(const MpcConfig& cfg, const LinearModel& model, const EgoState& x_k,
                       const std::vector<Vec2>& reference, double delta_prev);

}  // namespace latlab::ctrl
