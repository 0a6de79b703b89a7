#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "latlab/metrics.hpp"

using namespace latlab;
using harness::MetricsReport;
using harness::TraceLog;
using harness::TraceRow;

namespace {

TraceLog trace_from_errors(const std::vector<double>& errs, int kappa_class = 0) {
    TraceLog log;
    log.t_s = 0.1;
    for (std::size_t i = 0; i < errs.size(); ++i) {
        TraceRow r;
        r.t = 0.1 * static_cast<double>(i);
        r.d_err = errs[i];
        r.kappa_class = kappa_class;
        log.rows.push_back(r);
    }
    return log;
}

}  // namespace

TEST_CASE("MLE and RMSE of [1, -2, 3]") {
    TraceLog log = trace_from_errors({1.0, -2.0, 3.0});
    MetricsReport m = harness::compute_metrics(log);
    CHECK(m.mle_overall == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(m.rmse_overall == doctest::Approx(std::sqrt(14.0 / 3.0)).epsilon(1e-15));
    CHECK(m.mle_straight == m.mle_overall);
    CHECK(m.rmse_turn == 0.0);  // no turn samples
}

TEST_CASE("all-zero errors give zero metrics") {
    TraceLog log = trace_from_errors({0.0, 0.0, 0.0, 0.0});
    MetricsReport m = harness::compute_metrics(log);
    CHECK(m.mle_overall == 0.0);
    CHECK(m.rmse_overall == 0.0);
    CHECK(m.max_steering_velocity == 0.0);
}

TEST_CASE("steering velocity from a difference quotient") {
    TraceLog log = trace_from_errors({0.0, 0.0});
    log.rows[0].delta = 0.0;
    log.rows[1].delta = 0.05;
    MetricsReport m = harness::compute_metrics(log);
    CHECK(m.max_steering_velocity == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("overall MLE is the max of the class MLEs") {
    TraceLog log;
    log.t_s = 0.1;
    for (int i = 0; i < 10; ++i) {
        TraceRow r;
        r.d_err = (i % 2 == 0) ? 0.1 * i : -0.05 * i;
        r.kappa_class = i < 5 ? 0 : 1;
        log.rows.push_back(r);
    }
    MetricsReport m = harness::compute_metrics(log);
    CHECK(m.mle_overall == doctest::Approx(std::max(m.mle_straight, m.mle_turn)).epsilon(1e-15));
}

TEST_CASE("per-lap series from progress") {
    TraceLog log = trace_from_errors({0.4, 0.4, 0.4, 0.1, 0.1, 0.1});
    log.lap_length = 30.0;
    log.progress = {0.0, 10.0, 20.0, 30.0, 40.0, 50.0};
    MetricsReport m = harness::compute_metrics(log);
    REQUIRE(m.lap_count == 2);
    CHECK(m.lap_rmse[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(m.lap_rmse[1] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(m.lap_mean_signed[0] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("empty trace raises") {
    TraceLog log;
    CHECK_THROWS_AS(harness::compute_metrics(log), std::invalid_argument);
}

TEST_CASE("gvm accuracy report") {
    TraceLog log = trace_from_errors({0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < log.rows.size(); ++i) {
        log.rows[i].x = static_cast<double>(i);
        log.rows[i].y = 2.0;
        log.rows[i].x_hat = static_cast<double>(i);
        log.rows[i].y_hat = 2.0;
    }
    CHECK(harness::gvm_accuracy_report(log) == 0.0);
    for (std::size_t i = 1; i < log.rows.size(); ++i) log.rows[i].x_hat += 0.01;
    CHECK(harness::gvm_accuracy_report(log) == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("trace CSV round trip reproduces every metric exactly") {
    TraceLog log = trace_from_errors({0.3, -0.8, 1.2, 0.05});
    for (std::size_t i = 0; i < log.rows.size(); ++i) {
        TraceRow& r = log.rows[i];
        r.x = 1.1 * static_cast<double>(i) + 0.123456789123;
        r.y = -0.5 * static_cast<double>(i);
        r.theta = 0.01 * static_cast<double>(i);
        r.v = 10.0 - 0.01 * static_cast<double>(i);
        r.x_hat = r.x + 0.001;
        r.y_hat = r.y - 0.002;
        r.delta = 0.02 * static_cast<double>(i) * (i % 2 ? 1.0 : -1.0);
        r.delta_eff = r.delta + 0.0436;
        r.throttle = 0.5;
        r.yd_x = r.x + 1.0;
        r.yd_y = 0.0;
        r.kappa_class = i % 2 ? 1 : 0;
        r.loss_m = 0.001 * static_cast<double>(i);
        r.loss_c = 0.002 * static_cast<double>(i);
    }
    const std::string path = "/tmp/latlab_trace_roundtrip.csv";
    harness::write_trace_csv(path, log);
    TraceLog back = harness::read_trace_csv(path);
    REQUIRE(back.rows.size() == log.rows.size());

    MetricsReport a = harness::compute_metrics(log);
    MetricsReport b = harness::compute_metrics(back);
    CHECK(a.mle_overall == b.mle_overall);
    CHECK(a.rmse_overall == b.rmse_overall);
    CHECK(a.rmse_straight == b.rmse_straight);
    CHECK(a.rmse_turn == b.rmse_turn);
    CHECK(a.max_steering_velocity == b.max_steering_velocity);
    CHECK(harness::gvm_accuracy_report(log) == harness::gvm_accuracy_report(back));
}

TEST_CASE("trace CSV writes are byte-identical across runs") {
    TraceLog log = trace_from_errors({0.1, 0.2, 0.3});
    harness::write_trace_csv("/tmp/latlab_trace_a.csv", log);
    harness::write_trace_csv("/tmp/latlab_trace_b.csv", log);
    std::ifstream fa("/tmp/latlab_trace_a.csv"), fb("/tmp/latlab_trace_b.csv");
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK(sa.find("t,x,y,theta,v,x_hat") == 0);  // pinned column order
}
