#pragma once

#include <string>
#include <vector>

#include "latlab/track.hpp"
#include "latlab/types.hpp"

namespace latlab::harness {

/// One control step. `x_hat_*` is the model prediction made at the previous
/// step for this one (row 0 copies the observed state).
struct TraceRow {
    double t = 0.0;
    double x = 0.0, y = 0.0, theta = 0.0, v = 0.0;
    double x_hat = 0.0, y_hat = 0.0, theta_hat = 0.0, v_hat = 0.0;
    double delta = 0.0;      ///< commanded steering
    double delta_eff = 0.0;  ///< applied by the plant (includes D1 bias)
    double throttle = 0.0;
    double yd_x = 0.0, yd_y = 0.0;
    double d_err = 0.0;      ///< signed lateral error of CW, left positive
    int kappa_class = 0;     ///< 0 = straight, 1 = turn
    double loss_m = 0.0;
    double loss_c = 0.0;
};

struct TraceLog {
    std::vector<TraceRow> rows;
    double t_s = 0.1;
    bool failed = false;
    double lap_length = 0.0;          ///< reference path total length
    std::vector<double> progress;     ///< unwrapped arc-length progress per row

    std::size_t size() const { return rows.size(); }
};

struct MetricsReport {
    double mle_straight = 0.0, mle_turn = 0.0, mle_overall = 0.0;
    double rmse_straight = 0.0, rmse_turn = 0.0, rmse_overall = 0.0;
    double max_steering_velocity = 0.0;  ///< rad/s
    double mean_signed_error = 0.0;      ///< over the whole trace
    bool failed = false;
    std::vector<double> lap_rmse;         ///< per completed lap, when progress known
    std::vector<double> lap_mean_signed;  ///< mean signed error per lap
    std::vector<double> lap_mle;          ///< max |error| per lap
    int lap_count = 0;
};

/// MLE / RMSE split by curvature class plus the steering-velocity maximum.
MetricsReport compute_metrics(const TraceLog& trace);

/// RMSE of the one-step 2-D position predictions (rows 1..n-1).
double gvm_accuracy_report(const TraceLog& trace);

void write_trace_csv(const std::string& path, const TraceLog& trace);
TraceLog read_trace_csv(const std::string& path);

}  // namespace latlab::harness
