#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include "latlab/types.hpp"

namespace latlab::plant {

struct SimulationDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PlantParams {
    double mass = 1850.0;          ///< kg
    double wheelbase = 2.9;        ///< m
    double track_width = 1.6;      ///< m
    double a_front = 1.45;         ///< m, CW -> front axle
    double b_rear = 1.45;          ///< m, CW -> rear axle
    double yaw_inertia = 2700.0;   ///< kg m^2
    double c_front = 80000.0;      ///< N/rad, per axle
    double c_rear = 80000.0;       ///< N/rad, per axle
    double drag_coeff = 0.23;      ///< zeta
    double frontal_area = 2.2;     ///< m^2
    double air_density = 1.225;    ///< kg/m^3
    double max_steer = 1.0;        ///< rad
    bool throttle_creep = true;    ///< keep the constant term of the throttle map

    void validate() const;
};

/// 3-DOF plant state; (x, y) is the CW position, body-frame velocities.
struct PlantState {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
    double vx = 0.0;  ///< body longitudinal, m/s
    double vy = 0.0;  ///< body lateral, m/s
    double r = 0.0;   ///< yaw rate, rad/s

    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(theta) && std::isfinite(vx) &&
               std::isfinite(vy) && std::isfinite(r);
    }
};

/// D1 (steering bias) and D2 (friction scale) injectors.
struct Perturbation {
    double steer_bias = 0.0;      ///< rad, D1
    double friction_scale = 1.0;  ///< (0, 1], D2

    static Perturbation none() { return {}; }
    static Perturbation d1(double bias_rad) { return {bias_rad, 1.0}; }
    static Perturbation d2(double scale) { return {0.0, scale}; }
};

/// Throttle-to-acceleration map fitted as a second-order polynomial.
inline double throttle_accel(double throttle, bool creep = true) {
    return 6.5 * throttle * throttle + 0.6 * throttle + (creep ? 0.08 : 0.0);
}

/// Above this speed a closed throttle cuts the creep term (overrun coast).
constexpr double kCreepCutoffSpeed = 3.0;  // m/s

inline double drag_accel(double vx, const PlantParams& p) {
    return 0.5 * p.drag_coeff * p.frontal_area * p.air_density * vx * vx / p.mass;
}

/// Advance one sampling period with RK4 over the linear-tire bicycle ODE.
PlantState plant_step(const PlantState& state, const ControlInput& u, const PlantParams& params,
                      const Perturbation& pert, double t_s);

/// X = [x, y, theta, v] with v the speed magnitude.
EgoState observe(const PlantState& state);

struct WheelPose {
    Vec2 position;
    double heading = 0.0;
};

/// Wheel order: front-left, front-right, rear-left, rear-right.
/// Front wheels are additionally angled by the previous steering command.
std::array<WheelPose, 4> wheel_poses(const EgoState& ego, const PlantParams& params, double delta_prev);

/// Named parameter profiles standing in for three distinct production cars.
PlantParams profile(const std::string& name);

}  // namespace latlab::plant
