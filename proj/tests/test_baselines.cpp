#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fd_check.hpp"
#include "latlab/gvm.hpp"
#include "latlab/mpc.hpp"
#include "latlab/pid.hpp"
#include "latlab/stanley.hpp"

using namespace latlab;
using ctrl::MpcConfig;
using ctrl::QpProblem;

namespace {

// reduced active-set enumeration oracle for 3-variable box QPs: every
// variable is frozen at lo, at hi, or left free; feasible KKT candidates
// are compared by objective
Vec brute_force_box_qp(const Mat& H, const Vec& g, const Vec& lo, const Vec& hi) {
    const int n = 3;
    Vec best;
    double best_obj = 1e300;
    for (int mask = 0; mask < 27; ++mask) {
        int m = mask;
        std::vector<int> state(n);  // 0 free, 1 lo, 2 hi
        for (int i = 0; i < n; ++i) {
            state[i] = m % 3;
            m /= 3;
        }
        std::vector<int> free_idx;
        Vec x(n);
        for (int i = 0; i < n; ++i) {
            if (state[i] == 0)
                free_idx.push_back(i);
            else
                x(i) = state[i] == 1 ? lo(i) : hi(i);
        }
        if (!free_idx.empty()) {
            int k = static_cast<int>(free_idx.size());
            Mat Hff(k, k);
            Vec rhs(k);
            for (int a = 0; a < k; ++a) {
                rhs(a) = -g(free_idx[a]);
                for (int b = 0; b < k; ++b) Hff(a, b) = H(free_idx[a], free_idx[b]);
                for (int i = 0; i < n; ++i)
                    if (state[i] != 0) rhs(a) -= H(free_idx[a], i) * x(i);
            }
            Vec xf = Hff.ldlt().solve(rhs);
            for (int a = 0; a < k; ++a) x(free_idx[a]) = xf(a);
        }
        bool feasible = true;
        for (int i = 0; i < n; ++i) feasible = feasible && x(i) >= lo(i) - 1e-9 && x(i) <= hi(i) + 1e-9;
        if (!feasible) continue;
        double obj = 0.5 * x.dot(H * x) + g.dot(x);
        if (obj < best_obj) {
            best_obj = obj;
            best = x;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("qp: unconstrained interior minimum") {
    QpProblem qp;
    qp.H = Mat::Identity(2, 2);
    qp.g = Vec(2);
    qp.g << -1.0, -1.0;
    qp.lo = Vec::Constant(2, -10.0);
    qp.hi = Vec::Constant(2, 10.0);
    auto res = ctrl::qp_solve(qp);
    CHECK(res.converged);
    CHECK(res.x(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.x(1) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.kkt_residual < 1e-6);
}

TEST_CASE("qp: both bounds active") {
    QpProblem qp;
    qp.H = Mat::Identity(2, 2);
    qp.g = Vec(2);
    qp.g << -5.0, -5.0;
    qp.lo = Vec::Constant(2, -1.0);
    qp.hi = Vec::Constant(2, 1.0);
    auto res = ctrl::qp_solve(qp);
    CHECK(res.converged);
    CHECK(res.x(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.x(1) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.kkt_residual < 1e-6);
}

TEST_CASE("qp: rate constraint binds") {
    QpProblem qp;
    qp.H = Mat::Identity(2, 2);
    qp.g = Vec(2);
    qp.g << 0.0, -5.0;  // wants x = (0, 5)
    qp.lo = Vec::Constant(2, -10.0);
    qp.hi = Vec::Constant(2, 10.0);
    qp.has_rate = true;
    qp.rate_lo = Vec::Constant(1, -0.5);
    qp.rate_hi = Vec::Constant(1, 0.5);
    auto res = ctrl::qp_solve(qp);
    CHECK(res.converged);
    CHECK(res.x(1) - res.x(0) <= 0.5 + 1e-6);
    CHECK(res.kkt_residual < 1e-6);
    // optimum puts the difference at its bound
    CHECK(res.x(1) - res.x(0) == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("qp: random PSD instances satisfy KKT and match enumeration on 3 vars") {
    Rng rng(61);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 3;
        Mat a(n, n);
        for (long i = 0; i < n; ++i)
            for (long j = 0; j < n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
        Mat H = a.transpose() * a + 0.1 * Mat::Identity(n, n);
        Vec g(n), lo = Vec::Constant(n, -1.0), hi = Vec::Constant(n, 1.0);
        for (long i = 0; i < n; ++i) g(i) = rng.uniform(-2.0, 2.0);

        QpProblem qp{H, g, lo, hi, {}, {}, false};
        auto res = ctrl::qp_solve(qp);
        CHECK(res.converged);
        CHECK(res.kkt_residual < 1e-6);
        Vec want = brute_force_box_qp(H, g, lo, hi);
        CHECK((res.x - want).lpNorm<Eigen::Infinity>() < 1e-5);
    }
    // one larger instance: KKT only
    int n = 10;
    Mat a(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
    QpProblem qp;
    qp.H = a.transpose() * a + 0.5 * Mat::Identity(n, n);
    qp.g = Vec(n);
    for (long i = 0; i < n; ++i) qp.g(i) = rng.uniform(-3.0, 3.0);
    qp.lo = Vec::Constant(n, -0.8);
    qp.hi = Vec::Constant(n, 0.8);
    qp.has_rate = true;
    qp.rate_lo = Vec::Constant(n - 1, -0.3);
    qp.rate_hi = Vec::Constant(n - 1, 0.3);
    auto res = ctrl::qp_solve(qp);
    CHECK(res.converged);
    CHECK(res.kkt_residual < 1e-6);
}

TEST_CASE("linearization: small-angle row and affine consistency") {
    plant::PlantParams p = plant::profile("a");
    EgoState x{10.0, 2.0, 0.0, 8.0};
    double t_s = 0.1;
    auto m = ctrl::linearize_model(x, 0.0, 0.3, p, t_s);
    // d(ydot)/dtheta = v at theta = 0
    CHECK(m.A(1, 2) == doctest::Approx(t_s * 8.0).epsilon(1e-12));
    // exact affine consistency at the operating point
    Vec4 f = gvm::bicycle_derivative(x, 0.0, 0.3, p);
    Vec4 euler = x.vec() + t_s * f;
    Vec4 affine = m.A * x.vec() + m.B * 0.0 + m.c;
    CHECK((euler - affine).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("linearization matches a finite-difference Jacobian") {
    plant::PlantParams p = plant::profile("b");
    EgoState x{3.0, -2.0, 0.35, 9.0};
    double delta_op = 0.12, throttle = 0.5, t_s = 0.1;
    auto m = ctrl::linearize_model(x, delta_op, throttle, p, t_s);

    auto step = [&](const Vec4& xv, double d) {
        EgoState e = EgoState::from_vec(xv);
        return Vec4(xv + t_s * gvm::bicycle_derivative(e, d, throttle, p));
    };
    const double h = 1e-6;
    for (int col = 0; col < 4; ++col) {
        Vec4 xp = x.vec(), xm = x.vec();
        xp(col) += h;
        xm(col) -= h;
        Vec4 fd_col = (step(xp, delta_op) - step(xm, delta_op)) / (2.0 * h);
        for (int row = 0; row < 4; ++row) CHECK(std::abs(m.A(row, col) - fd_col(row)) < 1e-6);
    }
    Vec4 fd_b = (step(x.vec(), delta_op + h) - step(x.vec(), delta_op - h)) / (2.0 * h);
    for (int row = 0; row < 4; ++row) CHECK(std::abs(m.B(row) - fd_b(row)) < 1e-6);
}

TEST_CASE("mpc: exactly on a straight reference commands zero steering") {
    plant::PlantParams p = plant::profile("a");
    MpcConfig cfg;
    ctrl::MpcController mpc(cfg, p);
    track::ReferencePath path = track::generate_straight(500.0);
    EgoState x{5.0, 0.0, 0.0, 10.0};
    double delta = mpc.solve(x, path, 0.3);
    CHECK(std::abs(delta) < 1e-6);
    CHECK(mpc.last_kkt_residual() < 1e-6);
}

TEST_CASE("mpc: left offset steers right, and the QP matches a grid search") {
    plant::PlantParams p = plant::profile("a");
    MpcConfig cfg;
    cfg.horizon = 3;
    track::ReferencePath path = track::generate_straight(500.0);
    EgoState x{5.0, 0.5, 0.0, 10.0};  // half a metre left of the reference

    auto model = ctrl::linearize_model(x, 0.0, 0.3, p, cfg.t_s);
    std::vector<Vec2> ref;
    for (int j = 1; j <= cfg.horizon; ++j) ref.emplace_back(5.0 + 10.0 * cfg.t_s * j, 0.0);
    QpProblem qp = ctrl::build_mpc_qp(cfg, model, x, ref, 0.0);
    auto res = ctrl::qp_solve(qp, 1e-8, 20000);
    CHECK(res.converged);
    CHECK(res.x(0) < 0.0);  // steer right, back toward the path

    // independent cost evaluation: roll the affine model and sum the four
    // penalty terms directly
    auto cost = [&](const Vec& u) {
        double J = 0.0;
        Vec4 xs = x.vec();
        double prev = 0.0;
        for (int j = 0; j < cfg.horizon; ++j) {
            xs = model.A * xs + model.B * u(j) + model.c;
            Vec2 e(xs(0) - ref[static_cast<std::size_t>(j)].x(),
                   xs(1) - ref[static_cast<std::size_t>(j)].y());
            const Vec2& w = (j == cfg.horizon - 1) ? cfg.qf : cfg.q;
            J += w.x() * e.x() * e.x() + w.y() * e.y() * e.y();
            J += cfg.r_d * u(j) * u(j);
            J += cfg.r_d * (u(j) - prev) * (u(j) - prev);
            prev = u(j);
        }
        return J;
    };

    // coarse grid then local refinement around the best cell
    double rate_step = cfg.rate_max * cfg.t_s;
    Vec best(3);
    double best_j = 1e300;
    auto consider = [&](double u0, double u1, double u2) {
        if (std::abs(u0) > 1.0 || std::abs(u1) > 1.0 || std::abs(u2) > 1.0) return;
        if (std::abs(u0 - 0.0) > rate_step || std::abs(u1 - u0) > rate_step ||
            std::abs(u2 - u1) > rate_step)
            return;
        Vec u(3);
        u << u0, u1, u2;
        double J = cost(u);
        if (J < best_j) {
            best_j = J;
            best = u;
        }
    };
    for (double u0 = -rate_step; u0 <= rate_step + 1e-12; u0 += rate_step / 25.0)
        for (double u1 = u0 - rate_step; u1 <= u0 + rate_step + 1e-12; u1 += rate_step / 25.0)
            for (double u2 = u1 - rate_step; u2 <= u1 + rate_step + 1e-12; u2 += rate_step / 25.0)
                consider(u0, u1, u2);

    CHECK(cost(res.x) <= best_j + 1e-6);            // solver at least as good as the grid
    CHECK(std::abs(res.x(0) - best(0)) < 0.004);    // and the same argmin up to grid pitch
}

TEST_CASE("mpc: rate and box constraints hold exactly along an aggressive maneuver") {
    plant::PlantParams p = plant::profile("a");
    MpcConfig cfg;
    ctrl::MpcController mpc(cfg, p);
    track::ReferencePath path = track::generate_oval(30.0, 60.0);
    plant::PlantState ps;
    Vec2 pos;
    double heading;
    track::pose_at(path, 0.0, pos, heading);
    ps.x = pos.x();
    ps.y = pos.y() + 1.0;  // start offset
    ps.theta = heading;
    ps.vx = 10.0;
    double prev = 0.0;
    for (int k = 0; k < 120; ++k) {
        EgoState x = plant::observe(ps);
        double delta = mpc.solve(x, path, 0.4);
        CHECK(std::abs(delta) <= cfg.delta_max + 1e-12);
        CHECK(std::abs(delta - prev) <= cfg.rate_max * cfg.t_s + 1e-12);
        prev = delta;
        ps = plant::plant_step(ps, {delta, 0.4}, p, plant::Perturbation::none(), cfg.t_s);
    }
    CHECK(mpc.nonconverged_steps() == 0);
}

TEST_CASE("stanley: equilibrium, quarter-turn correction, velocity softening") {
    plant::PlantParams p = plant::profile("a");
    track::ReferencePath path = track::generate_straight(300.0);

    EgoState on_path{50.0, 0.0, 0.0, 10.0};
    CHECK(ctrl::stanley_steer(on_path, path, 1.0, p) == 0.0);

    // e_ct chosen so k*e_ct/(v + v_soft) = 1 -> arctan = pi/4
    double v = 10.0;
    double e_ct = (v + 0.1);
    EgoState right_of_path{50.0, -(e_ct + 0.0), 0.0, v};
    // front axle sits at the same lateral offset since theta = 0
    double delta = ctrl::stanley_steer(right_of_path, path, 1.0, p);
    CHECK(delta == doctest::Approx(M_PI / 4.0).epsilon(1e-12));

    // doubling v strictly shrinks the correction
    EgoState faster = right_of_path;
    faster.v = 2.0 * v;
    CHECK(std::abs(ctrl::stanley_steer(faster, path, 1.0, p)) < std::abs(delta));
}

TEST_CASE("stanley matches the closed form on random straight-track tuples") {
    plant::PlantParams p = plant::profile("a");
    track::ReferencePath path = track::generate_straight(1000.0);
    Rng rng(71);
    for (int i = 0; i < 100; ++i) {
        double d = rng.uniform(-3.0, 3.0);
        double theta = rng.uniform(-0.8, 0.8);
        double v = rng.uniform(0.3, 14.0);
        EgoState x{rng.uniform(50.0, 900.0), d, theta, v};
        double got = ctrl::stanley_steer(x, path, 1.0, p);
        double d_front = d + p.a_front * std::sin(theta);
        double want = std::clamp(-theta + std::atan(1.0 * (-d_front) / (v + 0.1)), -1.0, 1.0);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("pid: equilibrium, saturation, anti-windup clamp") {
    ctrl::Pid pid;
    CHECK(pid.update(10.0, 10.0, 0.1) == 0.0);
    ctrl::Pid pid2;
    CHECK(pid2.update(10.0, 0.0, 0.1) == 1.0);
    // integral clamp: long saturation then recovery is bounded
    ctrl::Pid pid3;
    for (int i = 0; i < 1000; ++i) pid3.update(10.0, 0.0, 0.1);
    double t = pid3.update(10.0, 10.0, 0.1);
    CHECK(t <= 0.05 * 0.5 + 0.01);  // ki * clamp plus a margin
}

TEST_CASE("pid closed loop settles near the reference within 15 s") {
    plant::PlantParams p = plant::profile("a");
    ctrl::Pid pid;
    plant::PlantState ps;
    ps.vx = 0.5;
    double t_s = 0.1;
    for (int k = 0; k < 150; ++k) {
        EgoState x = plant::observe(ps);
        double throttle = pid.update(10.0, x.v, t_s);
        ps = plant::plant_step(ps, {0.0, throttle}, p, plant::Perturbation::none(), t_s);
    }
    CHECK(plant::observe(ps).v == doctest::Approx(10.0).epsilon(0.05));
}
