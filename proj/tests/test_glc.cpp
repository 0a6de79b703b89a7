#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fd_check.hpp"
#include "latlab/glc.hpp"

using namespace latlab;
using glc::GlcConfig;
using glc::GlcController;
using glc::GlcNet;
using gvm::GvmNet;

namespace {

GlcConfig small_glc() {
    GlcConfig cfg;
    cfg.g2o.hidden = 8;
    cfg.g2o.out_dim = 4;
    cfg.mlp_hidden = {16};
    return cfg;
}

gvm::GvmConfig small_gvm() {
    gvm::GvmConfig cfg;
    cfg.g2o.hidden = 8;
    cfg.g2o.out_dim = 4;
    cfg.mlp_hidden = {16};
    return cfg;
}

}  // namespace

TEST_CASE("control graph shape: eight nodes, one-directional transition edges") {
    track::ReferencePath path = track::generate_straight(200.0);
    plant::PlantParams p = plant::profile("a");
    EgoState x{50.0, 0.0, 0.0, 10.0};
    auto wp = track::desired_waypoint(path, x);
    REQUIRE(wp.has_value());
    auto g = glc::build_control_graph(x, wp->position, wp->heading, 0.0, path, p, 0.1);
    g.validate();
    CHECK(g.schema.total_nodes() == 8);
    CHECK(g.node_features[0].rows() == 4);  // current carries velocity
    CHECK(g.node_features[1].rows() == 3);  // desired does not
    CHECK(g.edge_sets[2].edges.size() == 4);
    for (const auto& e : g.edge_sets[2].edges) CHECK(e.src == e.dst);  // wheel to its future self
    for (long k = 0; k < 4; ++k) CHECK(g.edge_sets[2].features(0, k) == 0.1);
}

TEST_CASE("zero transition: matching pose gives matching offset features") {
    track::ReferencePath path = track::generate_straight(200.0);
    plant::PlantParams p = plant::profile("a");
    // place the ego exactly on a waypoint pose
    EgoState x{80.0, 0.0, 0.0, 10.0};
    auto g = glc::build_control_graph(x, Vec2(80.0, 0.0), 0.0, 0.0, path, p, 0.1);
    const Mat& cur = g.node_features[0];
    const Mat& des = g.node_features[1];
    for (int i = 0; i < 4; ++i) {
        CHECK(cur(0, i) == doctest::Approx(des(0, i)).epsilon(1e-9));  // s offsets agree
        CHECK(cur(1, i) == doctest::Approx(des(1, i)).epsilon(1e-9));  // d offsets agree
        CHECK(cur(3, i) == doctest::Approx(des(2, i)).epsilon(1e-9));  // headings agree
    }
}

TEST_CASE("straight-ahead target: desired offsets mirror the current ones") {
    track::ReferencePath path = track::generate_straight(200.0);
    plant::PlantParams p = plant::profile("a");
    EgoState x{50.0, 0.0, 0.0, 10.0};
    auto wp = track::desired_waypoint(path, x);
    auto g = glc::build_control_graph(x, wp->position, wp->heading, 0.0, path, p, 0.1);
    const Mat& cur = g.node_features[0];
    const Mat& des = g.node_features[1];
    for (int i = 0; i < 4; ++i) {
        CHECK(des(0, i) == doctest::Approx(cur(0, i)).epsilon(1e-6));
        CHECK(std::abs(des(1, i)) == doctest::Approx(0.5 * p.track_width).epsilon(1e-6));
    }
}

TEST_CASE("previous steering shows up only in the current front wheels") {
    track::ReferencePath path = track::generate_straight(200.0);
    plant::PlantParams p = plant::profile("a");
    EgoState x{50.0, 0.2, 0.01, 10.0};
    auto wp = track::desired_waypoint(path, x);
    auto g0 = glc::build_control_graph(x, wp->position, wp->heading, 0.0, path, p, 0.1);
    auto g1 = glc::build_control_graph(x, wp->position, wp->heading, 0.1, path, p, 0.1);
    Mat diff_cur = g1.node_features[0] - g0.node_features[0];
    CHECK(diff_cur(3, 0) == doctest::Approx(0.1));
    CHECK(diff_cur(3, 1) == doctest::Approx(0.1));
    CHECK(diff_cur(3, 2) == 0.0);
    CHECK(diff_cur(3, 3) == 0.0);
    CHECK((g1.node_features[1] - g0.node_features[1]).norm() == 0.0);  // desired untouched
}

TEST_CASE("steer saturates through HardTanh: forced outputs") {
    Rng rng(41);
    GlcNet net(small_glc(), rng);
    track::ReferencePath path = track::generate_straight(200.0);
    plant::PlantParams p = plant::profile("a");
    EgoState x{50.0, 0.0, 0.0, 10.0};
    auto wp = track::desired_waypoint(path, x);
    auto g = glc::build_control_graph(x, wp->position, wp->heading, 0.0, path, p, 0.1);

    net.set_output_override(3.0);
    CHECK(net.steer(g) == 1.0);
    net.set_output_override(-0.2);
    CHECK(net.steer(g) == doctest::Approx(-0.4).epsilon(1e-15));
    net.set_output_override(-5.0);
    CHECK(net.steer(g) == -1.0);
}

TEST_CASE("steering output always lands in [-1, 1]") {
    Rng rng(42);
    GlcNet net(small_glc(), rng);
    // blow up the MLP weights to force extreme raw outputs
    for (auto* p : net.params()) p->value *= 50.0;
    track::ReferencePath path = track::generate_oval(30.0, 120.0);
    plant::PlantParams p = plant::profile("a");
    Rng qr(43);
    for (int i = 0; i < 50; ++i) {
        EgoState x{qr.uniform(-50.0, 250.0), qr.uniform(-40.0, 100.0), qr.uniform(-3.0, 3.0),
                   qr.uniform(0.0, 12.0)};
        auto wp = track::desired_waypoint(path, x);
        REQUIRE(wp.has_value());
        auto g = glc::build_control_graph(x, wp->position, wp->heading, qr.uniform(-1.0, 1.0),
                                          path, p, 0.1);
        double d = net.steer(g);
        CHECK(d >= -1.0);
        CHECK(d <= 1.0);
    }
}

TEST_CASE("zero MLP input with zero biases steers straight") {
    Rng rng(44);
    GlcNet net(small_glc(), rng);
    // biases initialize to zero, so a zero embedding difference maps to zero
    ad::Tape t;
    Rng rng2(45);
    ad::Mlp head({16, 8, 1}, rng2);
    ad::Var out = head.forward(t, t.constant(Mat::Zero(16, 1)), false);
    CHECK(t.scalar(out) == 0.0);
    CHECK(ad::hard_tanh(0.0) == 0.0);
}

TEST_CASE("glc_update: loss value for a controlled position error") {
    Rng rng(46), rng2(47);
    GlcNet glc_net(small_glc(), rng);
    GvmNet gvm_net(small_gvm(), rng2);
    gvm_net.set_gamma_override(Vec4::Ones());
    track::ReferencePath path = track::generate_straight(200.0);
    plant::PlantParams p = plant::profile("a");

    // at v = 0 the one-step prediction stays put regardless of steering
    EgoState x{50.5, 0.4, 0.0, 0.0};
    track::DesiredWaypoint wp;
    wp.position = Vec2(50.8, 0.0);  // e_c = (0.3, -0.4)
    wp.heading = 0.0;
    wp.velocity = 10.0;

    GlcController ctl(glc_net, {1e-3});
    ctl.act(x, wp, path, p);
    auto res = ctl.learn(gvm_net, 0.0, false);
    CHECK(res.loss == doctest::Approx(0.0625).epsilon(1e-12));
    CHECK(res.predicted.x == doctest::Approx(50.5));
    CHECK(res.predicted.y == doctest::Approx(0.4));
}

TEST_CASE("exact target: zero loss and zero gradient") {
    Rng rng(48), rng2(49);
    GlcNet glc_net(small_glc(), rng);
    GvmNet gvm_net(small_gvm(), rng2);
    gvm_net.set_gamma_override(Vec4::Ones());
    track::ReferencePath path = track::generate_straight(200.0);
    plant::PlantParams p = plant::profile("a");

    EgoState x{40.0, 0.0, 0.0, 0.0};  // stationary: prediction equals position
    track::DesiredWaypoint wp;
    wp.position = Vec2(40.0, 0.0);
    wp.heading = 0.0;

    GlcController ctl(glc_net, {1e-3});
    std::vector<Mat> before;
    for (auto* q : ctl.net().params()) before.push_back(q->value);
    ctl.act(x, wp, path, p);
    auto res = ctl.learn(gvm_net, 0.0, true);
    CHECK(res.loss == 0.0);
    auto after = ctl.net().params();
    for (std::size_t i = 0; i < after.size(); ++i) CHECK((after[i]->value - before[i]).norm() == 0.0);
}

TEST_CASE("gradient flows through the frozen GVM into the controller head") {
    Rng rng(50), rng2(51);
    GlcNet glc_net(small_glc(), rng);
    GvmNet gvm_net(small_gvm(), rng2);
    track::ReferencePath path = track::generate_straight(300.0);
    plant::PlantParams p = plant::profile("a");

    EgoState x{60.0, 0.8, -0.03, 9.0};
    auto wpo = track::desired_waypoint(path, x);
    REQUIRE(wpo.has_value());
    auto g_c = glc::build_control_graph(x, wpo->position, wpo->heading, 0.02, path, p, 0.1);

    auto chain_loss = [&](bool trainable, ad::Tape& t) {
        ad::Var delta = glc_net.steer_on_tape(t, g_c, trainable);
        auto pred = gvm_net.predict_on_tape(t, x, delta, 0.4, 0.02, path, p, false);
        ad::Var e_c = t.constant(Mat(wpo->position)) - ad::block(pred.xhat, 0, 0, 2, 1);
        return ad::mean(ad::smooth_l1(e_c));
    };

    ad::Tape t;
    ad::Var loss = chain_loss(true, t);
    t.backward(loss);

    auto glc_params = glc_net.params();
    auto gvm_params = gvm_net.params();
    double glc_gradnorm = 0.0;
    for (auto* q : glc_params) glc_gradnorm += q->grad.norm();
    double gvm_gradnorm = 0.0;
    for (auto* q : gvm_params) gvm_gradnorm += q->grad.norm();
    CHECK(glc_gradnorm > 1e-12);  // the chain into the controller is alive
    CHECK(gvm_gradnorm == 0.0);   // the frozen model accumulates nothing

    // finite differences over a deterministic subset of controller weights
    double worst = 0.0;
    const double h = 1e-5;
    int probed = 0;
    for (auto* q : glc_params) {
        Mat analytic = q->grad;
        q->zero_grad();
        for (long i = 0; i < q->value.rows() && probed < 60; ++i)
            for (long j = 0; j < q->value.cols() && probed < 60; ++j) {
                if ((i * 13 + j * 3) % 17 != 0) continue;
                double keep = q->value(i, j);
                q->value(i, j) = keep + h;
                ad::Tape tp;
                double fp = tp.scalar(chain_loss(false, tp));
                q->value(i, j) = keep - h;
                ad::Tape tm;
                double fm = tm.scalar(chain_loss(false, tm));
                q->value(i, j) = keep;
                worst = std::max(worst, fd::rel_err(analytic(i, j), (fp - fm) / (2.0 * h)));
                ++probed;
            }
    }
    CHECK(probed > 10);
    CHECK(worst < 1e-4);
}

TEST_CASE("run_online: zero steps gives an empty trace") {
    Rng rng(52), rng2(53);
    GlcNet glc_net(small_glc(), rng);
    GvmNet gvm_net(small_gvm(), rng2);
    ad::Adam gvm_opt({1e-4});
    gvm_opt.attach(gvm_net.params());
    track::ReferencePath path = track::generate_oval(30.0, 120.0);
    plant::PlantParams p = plant::profile("a");
    GlcController ctl(glc_net, {1e-4});
    glc::RunConfig cfg;
    cfg.max_steps = 0;
    auto trace = glc::run_online(ctl, gvm_net, gvm_opt, path, p, cfg);
    CHECK(trace.rows.empty());
}

TEST_CASE("pretrain_glc: zero epochs leave the controller untouched") {
    Rng rng(54), rng2(55);
    GlcNet glc_net(small_glc(), rng);
    GvmNet gvm_net(small_gvm(), rng2);
    track::ReferencePath path = track::generate_oval(30.0, 120.0);
    plant::PlantParams p = plant::profile("a");
    GlcController ctl(glc_net, {1e-3});
    std::vector<Mat> before;
    for (auto* q : ctl.net().params()) before.push_back(q->value);
    std::vector<const track::ReferencePath*> tracks = {&path};
    auto res = glc::pretrain_glc(ctl, gvm_net, tracks, p, 0);
    CHECK(res.epoch_loss.empty());
    auto after = ctl.net().params();
    for (std::size_t i = 0; i < after.size(); ++i) CHECK((after[i]->value - before[i]).norm() == 0.0);
}

TEST_CASE("checkpoint save/load round trip preserves steering") {
    Rng rng(56);
    GlcNet a(small_glc(), rng);
    track::ReferencePath path = track::generate_straight(200.0);
    plant::PlantParams p = plant::profile("a");
    EgoState x{50.0, 0.3, 0.02, 10.0};
    auto wp = track::desired_waypoint(path, x);
    auto g = glc::build_control_graph(x, wp->position, wp->heading, 0.0, path, p, 0.1);
    double before = a.steer(g);
    a.save("/tmp/latlab_glc_test.ckpt");

    Rng rng2(57);
    GlcNet b(small_glc(), rng2);
    CHECK(b.steer(g) != doctest::Approx(before).epsilon(1e-12));
    b.load("/tmp/latlab_glc_test.ckpt");
    CHECK(b.steer(g) == doctest::Approx(before).epsilon(1e-15));
}
