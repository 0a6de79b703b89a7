#pragma once

#include <algorithm>

namespace latlab::ctrl {

/// Longitudinal PID with integral clamping; output is a throttle in [0, 1].
class Pid {
public:
    struct Config {
        double kp = 0.6;
        double ki = 0.05;
        double kd = 0.01;
        double integral_clamp = 0.5;
        double out_lo = 0.0;
        double out_hi = 1.0;
    };

    Pid() = default;
    explicit Pid(Config cfg) : cfg_(cfg) {}

    double update(double ref, double measured, double t_s) {
        double e = ref - measured;
        integral_ = std::clamp(integral_ + e * t_s, -cfg_.integral_clamp, cfg_.integral_clamp);
        double deriv = has_prev_ ? (e - prev_error_) / t_s : 0.0;
        prev_error_ = e;
        has_prev_ = true;
        double u = cfg_.kp * e + cfg_.ki * integral_ + cfg_.kd * deriv;
        return std::clamp(u, cfg_.out_lo, cfg_.out_hi);
    }

    void reset() {
        integral_ = 0.0;
        prev_error_ = 0.0;
        has_prev_ = false;
    }

private:
    Config cfg_;
    double integral_ = 0.0;
    double prev_error_ = 0.0;
    bool has_prev_ = false;
};

}  // namespace latlab::ctrl
