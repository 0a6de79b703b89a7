#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "latlab/nn.hpp"

using namespace latlab;
using ad::Tape;
using ad::Var;

TEST_CASE("identity-initialized single layer passes input through") {
    Rng rng(1);
    ad::Mlp mlp({3, 3}, rng);
    auto params = mlp.params();
    params[0]->value = Mat::Identity(3, 3);
    params[1]->value.setZero();
    Mat x(3, 1);
    x << 0.5, -1.5, 2.0;
    Tape t;
    Var y = mlp.forward(t, t.constant(x), false);
    CHECK((t.val(y) - x).norm() == 0.0);
}

TEST_CASE("all-zero weights and biases give zero output") {
    Rng rng(2);
    ad::Mlp mlp({4, 5, 2}, rng);
    for (auto* p : mlp.params()) p->value.setZero();
    Mat x = Mat::Random(4, 1);
    Tape t;
    CHECK(t.val(mlp.forward(t, t.constant(x), false)).norm() == 0.0);
}

TEST_CASE("two-layer net against a hand computation") {
    Rng rng(3);
    ad::Mlp mlp({2, 2, 1}, rng);
    auto params = mlp.params();
    params[0]->value << 1.0, -2.0, 0.5, 3.0;   // W1
    params[1]->value << 0.1, -0.2;             // b1
    params[2]->value << 2.0, -1.0;             // W2 (1x2)
    params[3]->value << 0.25;                  // b2
    Mat x(2, 1);
    x << 0.3, 0.7;
    // hidden = ReLU(W1 x + b1) = ReLU([0.3-1.4+0.1, 0.15+2.1-0.2]) = [0, 2.05]
    // out = 2*0 - 1*2.05 + 0.25 = -1.8
    Tape t;
    Var y = mlp.forward(t, t.constant(x), false);
    CHECK(t.scalar(y) == doctest::Approx(-1.8).epsilon(1e-12));
}

TEST_CASE("mlp parameter count") {
    Rng rng(4);
    ad::Mlp mlp({4, 8, 2}, rng);
    CHECK(mlp.param_count() == 4 * 8 + 8 + 8 * 2 + 2);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    ad::Parameter p(Mat::Constant(2, 2, 1.5));
    ad::Adam opt({0.1});
    opt.attach({&p});
    opt.step();
    CHECK((p.value.array() == 1.5).all());
}

TEST_CASE("adam: first bias-corrected step is about -lr for unit gradient") {
    ad::Parameter p(Mat::Constant(1, 1, 0.0));
    ad::Adam opt({0.1});
    opt.attach({&p});
    p.grad(0, 0) = 1.0;
    opt.step();
    // mhat = 1, vhat = 1 -> update = -lr / (1 + eps)
    CHECK(p.value(0, 0) == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));
    CHECK(p.grad(0, 0) == 0.0);  // grads consumed
}

TEST_CASE("adam: constant gradient walks against its sign") {
    ad::Parameter p(Mat::Constant(1, 1, 0.0));
    ad::Adam opt({0.01});
    opt.attach({&p});
    for (int i = 0; i < 50; ++i) {
        p.grad(0, 0) = 2.5;
        opt.step();
    }
    CHECK(p.value(0, 0) < -0.1);
}

TEST_CASE("adam: non-finite gradient skips the whole update") {
    ad::Parameter a(Mat::Constant(1, 1, 1.0));
    ad::Parameter b(Mat::Constant(1, 1, 1.0));
    ad::Adam opt({0.1});
    opt.attach({&a, &b});
    a.grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    b.grad(0, 0) = 1.0;
    opt.step();
    CHECK(a.value(0, 0) == 1.0);
    CHECK(b.value(0, 0) == 1.0);
    CHECK(opt.skipped_updates() == 1);
    CHECK(opt.step_count() == 0);
}

TEST_CASE("checkpoint round trip and shape verification") {
    Rng rng(5);
    ad::Mlp src({3, 4, 2}, rng);
    ad::Mlp dst({3, 4, 2}, rng);
    std::stringstream buf;
    ad::save_params(buf, src.params());
    ad::load_params(buf, dst.params());
    auto sp = src.params();
    auto dp = dst.params();
    for (std::size_t i = 0; i < sp.size(); ++i) CHECK((sp[i]->value - dp[i]->value).norm() == 0.0);

    ad::Mlp wrong({3, 5, 2}, rng);
    std::stringstream buf2;
    ad::save_params(buf2, src.params());
    CHECK_THROWS_AS(ad::load_params(buf2, wrong.params()), std::runtime_error);
}

TEST_CASE("training chain is deterministic for a fixed seed") {
    auto run = [] {
        Rng rng(99);
        ad::Mlp mlp({3, 6, 1}, rng);
        ad::Adam opt({1e-3});
        opt.attach(mlp.params());
        Rng data(123);
        for (int i = 0; i < 40; ++i) {
            Mat x(3, 1);
            x << data.uniform(-1, 1), data.uniform(-1, 1), data.uniform(-1, 1);
            Tape t;
            Var loss = ad::mean(ad::smooth_l1(mlp.forward(t, t.constant(x), true)));
            t.backward(loss);
            opt.step();
        }
        std::stringstream buf;
        ad::save_params(buf, mlp.params());
        return buf.str();
    };
    CHECK(run() == run());  // bit-identical parameters
}
