#include "latlab/mpc.hpp"

#include <cmath>
#include <stdexcept>

#include "latlab/gvm.hpp"

namespace latlab::ctrl {

void MpcConfig::validate() const {
    if (horizon < 2) throw std::invalid_argument("mpc: horizon must be >= 2");
    if (delta_min >= delta_max || rate_max <= 0.0 || t_s <= 0.0)
        throw std::invalid_argument("mpc: inconsistent bounds");
    if (r_d < 0.0 || q.minCoeff() < 0.0 || qf.minCoeff() < 0.0)
        throw std::invalid_argument("mpc: weights must be nonnegative");
}

LinearModel linearize_model(const EgoState& x_op, double delta_op, double throttle,
                            const plant::PlantParams& params, double t_s) {
    if (std::abs(delta_op) >= M_PI / 2.0) throw std::invalid_argument("linearize: |delta| too large");

    double v = x_op.v;
    double td = std::tan(delta_op);
    double beta = std::atan(td / 2.0);
    double course = x_op.theta + beta;
    double cb = std::cos(beta), sb = std::sin(beta);
    double sec2 = 1.0 + td * td;
    double dbeta = (sec2 / 2.0) / (1.0 + 0.25 * td * td);

    // continuous-time Jacobian of the bicycle derivative
    Mat J = Mat::Zero(4, 4);
    J(0, 2) = -v * std::sin(course);
    J(0, 3) = std::cos(course);
    J(1, 2) = v * std::cos(course);
    J(1, 3) = std::sin(course);
    J(2, 3) = td * cb / params.wheelbase;
    J(3, 3) = -params.drag_coeff * params.frontal_area * params.air_density * v / params.mass;

    Vec4 dfd;
    dfd(0) = -v * std::sin(course) * dbeta;
    dfd(1) = v * std::cos(course) * dbeta;
    dfd(2) = v / params.wheelbase * (sec2 * cb - td * sb * dbeta);
    dfd(3) = 0.0;

    LinearModel m;
    m.A = Mat::Identity(4, 4) + t_s * J;
    m.B = t_s * dfd;
    Vec4 f = gvm::bicycle_derivative(x_op, delta_op, throttle, params);
    Vec4 x_next = x_op.vec() + t_s * f;
    m.c = x_next - m.A * x_op.vec() - m.B * delta_op;
    return m;
}

QpProblem build_mpc_qp(const MpcConfig& cfg, const LinearModel& model, const EgoState& x_k,
                       const std::vector<Vec2>& reference, double delta_prev) {
    int p = cfg.horizon;
    if (static_cast<int>(reference.size()) != p)
        throw std::invalid_argument("mpc: reference horizon size mismatch");

    // stack position predictions: Y = y0 + S_u u, with constant (A, B, c)
    Mat d2 = Mat::Zero(2, 4);
    d2(0, 0) = 1.0;
    d2(1, 1) = 1.0;

    std::vector<Mat> a_pow(p + 1);   // A^j
    a_pow[0] = Mat::Identity(4, 4);
    for (int j = 1; j <= p; ++j) a_pow[j] = a_pow[j - 1] * model.A;

    Mat s_u = Mat::Zero(2 * p, p);
    Vec y0(2 * p);
    Vec4 csum = Vec4::Zero();  // sum_{m<j} A^m c
    for (int j = 1; j <= p; ++j) {
        csum = model.A * csum;
        csum += model.c;
        Vec4 free_resp = a_pow[j] * x_k.vec() + csum;
        y0.segment(2 * (j - 1), 2) = d2 * free_resp;
        for (int i = 0; i < j; ++i)
            s_u.block(2 * (j - 1), i, 2, 1) = d2 * (a_pow[j - 1 - i] * model.B);
    }

    Vec w(2 * p);
    for (int j = 1; j <= p; ++j) {
        const Vec2& qw = (j == p) ? cfg.qf : cfg.q;
        w.segment(2 * (j - 1), 2) = qw;
    }
    Vec r(2 * p);
    for (int j = 0; j < p; ++j) r.segment(2 * j, 2) = reference[static_cast<std::size_t>(j)];

    // first-difference matrix with u_{-1} = delta_prev folded into b
    Mat dr = Mat::Zero(p, p);
    Vec b = Vec::Zero(p);
    dr(0, 0) = 1.0;
    b(0) = delta_prev;
    for (int j = 1; j < p; ++j) {
        dr(j, j) = 1.0;
        dr(j, j - 1) = -1.0;
    }

    QpProblem qp;
    Mat swu = w.asDiagonal() * s_u;
    qp.H = 2.0 * (s_u.transpose() * swu + cfg.r_d * Mat::Identity(p, p) +
                  cfg.r_d * dr.transpose() * dr);
    qp.H = 0.5 * (qp.H + qp.H.transpose());  // symmetrize roundoff
    qp.g = 2.0 * (swu.transpose() * (y0 - r) - cfg.r_d * dr.transpose() * b);

    double rate_step = cfg.rate_max * cfg.t_s;
    qp.lo = Vec::Constant(p, cfg.delta_min);
    qp.hi = Vec::Constant(p, cfg.delta_max);
    qp.lo(0) = std::max(cfg.delta_min, delta_prev - rate_step);
    qp.hi(0) = std::min(cfg.delta_max, delta_prev + rate_step);
    if (qp.lo(0) > qp.hi(0)) {  // delta_prev outside the box; admit the nearest feasible move
        qp.lo(0) = cfg.delta_min;
        qp.hi(0) = cfg.delta_max;
    }
    qp.has_rate = p > 1;
    qp.rate_lo = Vec::Constant(p - 1, -rate_step);
    qp.rate_hi = Vec::Constant(p - 1, rate_step);
    return qp;
}

MpcController::MpcController(MpcConfig cfg, plant::PlantParams params)
    : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
    warm_.x = Vec::Zero(cfg_.horizon);
}

void MpcController::reset() {
    warm_ = QpWarmState{};
    warm_.x = Vec::Zero(cfg_.horizon);
    delta_prev_ = 0.0;
    nonconverged_ = 0;
}

double MpcController::solve(const EgoState& x_k, const track::ReferencePath& path, double throttle) {
    int p = cfg_.horizon;
    track::FrenetCoord f = track::frenet_coordinate(path, Vec2(x_k.x, x_k.y));
    double ds = std::max(x_k.v, 1.0) * cfg_.t_s;  // horizon spacing follows current speed
    std::vector<Vec2> ref;
    ref.reserve(static_cast<std::size_t>(p));
    for (int j = 1; j <= p; ++j) {
        double s = f.s + ds * j;
        if (!path.closed) s = std::min(s, path.total_length);
        Vec2 pos;
        double heading;
        track::pose_at(path, s, pos, heading);
        ref.push_back(pos);
    }

    LinearModel model = linearize_model(x_k, delta_prev_, throttle, params_, cfg_.t_s);
    QpProblem qp = build_mpc_qp(cfg_, model, x_k, ref, delta_prev_);
    QpResult res = qp_solve(qp, cfg_.qp_tol, cfg_.qp_max_iter, &warm_);
    last_kkt_ = res.kkt_residual;

    if (!res.converged) {
        ++nonconverged_;
        return delta_prev_;
    }

    // stage-wise projection makes box and rate feasibility exact
    double rate_step = cfg_.rate_max * cfg_.t_s;
    Vec u = res.x;
    double prev = delta_prev_;
    for (int j = 0; j < p; ++j) {
        double lo = std::max(cfg_.delta_min, prev - rate_step);
        double hi = std::min(cfg_.delta_max, prev + rate_step);
        u(j) = std::clamp(u(j), lo, hi);
        prev = u(j);
    }

    // shift the primal warm start one step forward; duals carry over as-is
    warm_.x.head(p - 1) = u.tail(p - 1);
    warm_.x(p - 1) = u(p - 1);

    delta_prev_ = u(0);
    return u(0);
}

}  // namespace latlab::ctrl
