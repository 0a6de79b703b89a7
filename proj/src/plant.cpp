#include "latlab/plant.hpp"

#include <cmath>

namespace latlab::plant {

void PlantParams::validate() const {
    if (mass <= 0 || wheelbase <= 0 || track_width <= 0 || a_front <= 0 || b_rear <= 0 ||
        yaw_inertia <= 0 || c_front <= 0 || c_rear <= 0 || frontal_area <= 0 || air_density <= 0)
        throw std::invalid_argument("plant: parameters must be positive");
    if (std::abs(a_front + b_rear - wheelbase) > 1e-9)
        throw std::invalid_argument("plant: a_front + b_rear must equal wheelbase");
}

namespace {

struct Derivative {
    double dx, dy, dtheta, dvx, dvy, dr;
};

Derivative dynamics(const PlantState& s, double delta_eff, double throttle, const PlantParams& p,
                    double friction_scale) {
    // driveline creep acts under power or near idle speeds; coasting above
    // that is a pure-drag overrun, which is what lets the PID hold a cruise
    // speed below the creep/drag balance point
    bool creep = p.throttle_creep && (throttle > 1e-9 || s.vx <= kCreepCutoffSpeed);
    double a_net = throttle_accel(throttle, creep) - drag_accel(s.vx, p);

    double alpha_f = delta_eff - std::atan2(s.vy + p.a_front * s.r, s.vx);
    double alpha_r = -std::atan2(s.vy - p.b_rear * s.r, s.vx);
    double fyf = friction_scale * p.c_front * alpha_f;
    double fyr = friction_scale * p.c_rear * alpha_r;

    double cd = std::cos(delta_eff);
    double sd = std::sin(delta_eff);

    Derivative d;
    d.dx = s.vx * std::cos(s.theta) - s.vy * std::sin(s.theta);
    d.dy = s.vx * std::sin(s.theta) + s.vy * std::cos(s.theta);
    d.dtheta = s.r;
    d.dvx = a_net + s.vy * s.r - fyf * sd / p.mass;
    d.dvy = (fyf * cd + fyr) / p.mass - s.vx * s.r;
    d.dr = (p.a_front * fyf * cd - p.b_rear * fyr) / p.yaw_inertia;
    return d;
}

PlantState advance(const PlantState& s, const Derivative& d, double h) {
    PlantState out = s;
    out.x += h * d.dx;
    out.y += h * d.dy;
    out.theta += h * d.dtheta;
    out.vx += h * d.dvx;
    out.vy += h * d.dvy;
    out.r += h * d.dr;
    return out;
}

}  // namespace

PlantState plant_step(const PlantState& state, const ControlInput& u, const PlantParams& params,
                      const Perturbation& pert, double t_s) {
    if (t_s <= 0.0) throw std::invalid_argument("plant_step: t_s must be positive");
    if (!state.finite()) throw SimulationDiverged("plant_step: non-finite state");
    if (pert.friction_scale <= 0.0 || pert.friction_scale > 1.0)
        throw std::invalid_argument("plant_step: friction_scale must be in (0, 1]");

    double delta_eff = std::clamp(u.steer, -params.max_steer, params.max_steer) + pert.steer_bias;
    double throttle = std::clamp(u.throttle, 0.0, 1.0);

    // fixed substep count keeps the tire dynamics inside the RK4 stability
    // region at low speed while preserving O(t_s^4) convergence in t_s
    constexpr int kSubsteps = 4;
    double h = t_s / kSubsteps;
    PlantState out = state;
    for (int sub = 0; sub < kSubsteps; ++sub) {
        Derivative k1 = dynamics(out, delta_eff, throttle, params, pert.friction_scale);
        Derivative k2 = dynamics(advance(out, k1, 0.5 * h), delta_eff, throttle, params, pert.friction_scale);
        Derivative k3 = dynamics(advance(out, k2, 0.5 * h), delta_eff, throttle, params, pert.friction_scale);
        Derivative k4 = dynamics(advance(out, k3, h), delta_eff, throttle, params, pert.friction_scale);
        out.x += h / 6.0 * (k1.dx + 2 * k2.dx + 2 * k3.dx + k4.dx);
        out.y += h / 6.0 * (k1.dy + 2 * k2.dy + 2 * k3.dy + k4.dy);
        out.theta += h / 6.0 * (k1.dtheta + 2 * k2.dtheta + 2 * k3.dtheta + k4.dtheta);
        out.vx += h / 6.0 * (k1.dvx + 2 * k2.dvx + 2 * k3.dvx + k4.dvx);
        out.vy += h / 6.0 * (k1.dvy + 2 * k2.dvy + 2 * k3.dvy + k4.dvy);
        out.r += h / 6.0 * (k1.dr + 2 * k2.dr + 2 * k3.dr + k4.dr);
        if (out.vx < 0.0) out.vx = 0.0;  // no reverse in this operating regime
    }

    if (!out.finite()) throw SimulationDiverged("plant_step: diverged");
    return out;
}

EgoState observe(const PlantState& state) {
    if (!state.finite()) throw SimulationDiverged("observe: non-finite state");
    return {state.x, state.y, wrap_angle(state.theta), std::hypot(state.vx, state.vy)};
}

std::array<WheelPose, 4> wheel_poses(const EgoState& ego, const PlantParams& params, double delta_prev) {
    double c = std::cos(ego.theta), s = std::sin(ego.theta);
    double half_track = 0.5 * params.track_width;
    // body-frame corners: FL, FR, RL, RR
    const std::array<Vec2, 4> body = {
        Vec2(params.a_front, half_track),
        Vec2(params.a_front, -half_track),
        Vec2(-params.b_rear, half_track),
        Vec2(-params.b_rear, -half_track),
    };
    std::array<WheelPose, 4> out;
    for (int i = 0; i < 4; ++i) {
        out[i].position = Vec2(ego.x + c * body[i].x() - s * body[i].y(),
                               ego.y + s * body[i].x() + c * body[i].y());
        out[i].heading = ego.theta + (i < 2 ? delta_prev : 0.0);
    }
    return out;
}

PlantParams profile(const std::string& name) {
    PlantParams p;
    if (name == "a" || name == "profile-a") {
        // defaults above: mid-size EV
    } else if (name == "b" || name == "profile-b") {
        p.mass = 1380.0;
        p.wheelbase = 2.7;
        p.a_front = 1.35;
        p.b_rear = 1.35;
        p.track_width = 1.53;
        p.yaw_inertia = 2030.0;
        p.c_front = 62000.0;
        p.c_rear = 62000.0;
        p.drag_coeff = 0.26;
        p.frontal_area = 2.0;
    } else if (name == "c" || name == "profile-c") {
        p.mass = 1700.0;
        p.wheelbase = 2.72;
        p.a_front = 1.36;
        p.b_rear = 1.36;
        p.track_width = 1.58;
        p.yaw_inertia = 2400.0;
        p.c_front = 95000.0;
        p.c_rear = 88000.0;
        p.drag_coeff = 0.32;
        p.frontal_area = 2.1;
    } else {
        throw std::invalid_argument("plant: unknown profile '" + name + "'");
    }
    p.validate();
    return p;
}

}  // namespace latlab::plant
