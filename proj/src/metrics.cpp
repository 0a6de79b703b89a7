#include "latlab/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace latlab::harness {

MetricsReport compute_metrics(const TraceLog& trace) {
    if (trace.rows.empty()) throw std::invalid_argument("compute_metrics: empty trace");

    MetricsReport r;
    r.failed = trace.failed;
    double sq_straight = 0.0, sq_turn = 0.0;
    std::size_t n_straight = 0, n_turn = 0;
    double signed_sum = 0.0;
    for (const TraceRow& row : trace.rows) {
        double e = row.d_err;
        signed_sum += e;
        if (row.kappa_class == 0) {
            r.mle_straight = std::max(r.mle_straight, std::abs(e));
            sq_straight += e * e;
            ++n_straight;
        } else {
            r.mle_turn = std::max(r.mle_turn, std::abs(e));
            sq_turn += e * e;
            ++n_turn;
        }
    }
    r.mle_overall = std::max(r.mle_straight, r.mle_turn);
    r.rmse_straight = n_straight ? std::sqrt(sq_straight / n_straight) : 0.0;
    r.rmse_turn = n_turn ? std::sqrt(sq_turn / n_turn) : 0.0;
    r.rmse_overall = std::sqrt((sq_straight + sq_turn) / static_cast<double>(trace.rows.size()));
    r.mean_signed_error = signed_sum / static_cast<double>(trace.rows.size());

    for (std::size_t i = 1; i < trace.rows.size(); ++i) {
        double dv = std::abs(trace.rows[i].delta - trace.rows[i - 1].delta) / trace.t_s;
        r.max_steering_velocity = std::max(r.max_steering_velocity, dv);
    }

    if (!trace.progress.empty() && trace.lap_length > 0.0) {
        int laps = static_cast<int>(std::floor(trace.progress.back() / trace.lap_length)) + 1;
        std::vector<double> sq(laps, 0.0), mean(laps, 0.0), mle(laps, 0.0);
        std::vector<std::size_t> cnt(laps, 0);
        for (std::size_t i = 0; i < trace.rows.size(); ++i) {
            int lap = std::min(laps - 1, static_cast<int>(trace.progress[i] / trace.lap_length));
            sq[lap] += trace.rows[i].d_err * trace.rows[i].d_err;
            mean[lap] += trace.rows[i].d_err;
            mle[lap] = std::max(mle[lap], std::abs(trace.rows[i].d_err));
            ++cnt[lap];
        }
        for (int l = 0; l < laps; ++l) {
            if (cnt[l] == 0) continue;
            r.lap_rmse.push_back(std::sqrt(sq[l] / cnt[l]));
            r.lap_mean_signed.push_back(mean[l] / cnt[l]);
            r.lap_mle.push_back(mle[l]);
        }
        r.lap_count = static_cast<int>(r.lap_rmse.size());
    }
    return r;
}

double gvm_accuracy_report(const TraceLog& trace) {
    double sq = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 1; i < trace.rows.size(); ++i) {
        const TraceRow& row = trace.rows[i];
        if (!std::isfinite(row.x_hat) || !std::isfinite(row.y_hat)) continue;
        double dx = row.x - row.x_hat;
        double dy = row.y - row.y_hat;
        sq += dx * dx + dy * dy;
        ++n;
    }
    return n ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
}

namespace {
constexpr const char* kHeader =
    "t,x,y,theta,v,x_hat,y_hat,theta_hat,v_hat,delta,delta_eff,throttle,yd_x,yd_y,d_err,"
    "kappa_class,loss_m,loss_c";
}

void write_trace_csv(const std::string& path, const TraceLog& trace) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("trace: cannot open " + path + " for write");
    f << kHeader << "\n";
    char buf[640];
    for (const TraceRow& r : trace.rows) {
        std::snprintf(buf, sizeof(buf),
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                      "%.17g,%.17g,%.17g,%d,%.17g,%.17g",
                      r.t, r.x, r.y, r.theta, r.v, r.x_hat, r.y_hat, r.theta_hat, r.v_hat, r.delta,
                      r.delta_eff, r.throttle, r.yd_x, r.yd_y, r.d_err, r.kappa_class, r.loss_m,
                      r.loss_c);
        f << buf << "\n";
    }
}

TraceLog read_trace_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("trace: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("trace: empty file " + path);
    TraceLog log;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
        if (vals.size() != 18) throw std::runtime_error("trace: malformed row in " + path);
        TraceRow r;
        r.t = vals[0];
        r.x = vals[1];
        r.y = vals[2];
        r.theta = vals[3];
        r.v = vals[4];
        r.x_hat = vals[5];
        r.y_hat = vals[6];
        r.theta_hat = vals[7];
        r.v_hat = vals[8];
        r.delta = vals[9];
        r.delta_eff = vals[10];
        r.throttle = vals[11];
        r.yd_x = vals[12];
        r.yd_y = vals[13];
        r.d_err = vals[14];
        r.kappa_class = static_cast<int>(vals[15]);
        r.loss_m = vals[16];
        r.loss_c = vals[17];
        log.rows.push_back(r);
    }
    if (log.rows.size() >= 2) log.t_s = log.rows[1].t - log.rows[0].t;
    return log;
}

}  // namespace latlab::harness
