#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace latlab {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Observed ego state X = [x, y, theta, v].
struct EgoState {
    double x = 0.0;      ///< m, global
    double y = 0.0;      ///< m, global
    double theta = 0.0;  ///< rad
    double v = 0.0;      ///< m/s, speed magnitude

    Vec4 vec() const { return Vec4(x, y, theta, v); }
    static EgoState from_vec(const Vec4& s) { return {s(0), s(1), s(2), s(3)}; }
};

/// One step of actuator commands.
struct ControlInput {
    double steer = 0.0;     ///< rad
    double throttle = 0.0;  ///< dimensionless, [0, 1]
};

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * M_PI);
    if (a <= -M_PI) a += 2.0 * M_PI;
    return a;
}

}  // namespace latlab
