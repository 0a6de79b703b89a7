#include "latlab/gvm.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace latlab::gvm {

using ad::Tape;
using ad::Var;

Vec4 bicycle_derivative(const EgoState& x, double delta, double throttle,
                        const plant::PlantParams& params) {
    double beta = std::atan(std::tan(delta) / 2.0);
    double a_net = plant::throttle_accel(throttle) - plant::drag_accel(x.v, params);
    return Vec4(x.v * std::cos(x.theta + beta), x.v * std::sin(x.theta + beta),
                x.v * std::tan(delta) * std::cos(beta) / params.wheelbase, a_net);
}

Var bicycle_derivative(Tape& t, const EgoState& x, Var delta, double throttle,
                       const plant::PlantParams& params) {
    double a_net = plant::throttle_accel(throttle) - plant::drag_accel(x.v, params);
    Var tan_d = ad::tan(delta);
    Var beta = ad::atan(ad::scale(tan_d, 0.5));
    Var course = ad::add_const(beta, x.theta);
    Var row_x = ad::scale(ad::cos(course), x.v);
    Var row_y = ad::scale(ad::sin(course), x.v);
    Var row_theta = ad::scale(ad::mul(tan_d, ad::cos(beta)), x.v / params.wheelbase);
    Var row_v = t.constant(a_net);
    std::array<Var, 4> rows = {row_x, row_y, row_theta, row_v};
    return ad::vcat(rows);
}

gnn::GraphSchema model_graph_schema() {
    gnn::GraphSchema s;
    s.node_types = {{"wheel", 4, 4}, {"actuator", 2, 1}};
    s.edge_types = {{"wheel_wheel", "wheel", "wheel", 1},
                    {"actuator_wheel", "actuator", "wheel", 1},
                    {"actuator_actuator", "actuator", "actuator", 0}};
    return s;
}

namespace {

/// Wheel feature columns per the paper's feature vectors; order FL FR RL RR.
Mat wheel_feature_matrix(const EgoState& x_k, double delta_prev, const track::ReferencePath& path,
                         const plant::PlantParams& params) {
    auto wheels = plant::wheel_poses(x_k, params, delta_prev);
    track::FrenetCoord cw = track::frenet_coordinate(path, Vec2(x_k.x, x_k.y));
    Mat f(4, 4);
    for (int i = 0; i < 4; ++i) {
        track::FrenetCoord wf = track::frenet_coordinate(path, wheels[i].position);
        double ds = wf.s - cw.s;
        if (path.closed) {  // wheel and CW projections may straddle the seam
            if (ds > 0.5 * path.total_length) ds -= path.total_length;
            if (ds < -0.5 * path.total_length) ds += path.total_length;
        }
        f(0, i) = ds;
        f(1, i) = wf.d - cw.d;
        f(2, i) = x_k.v;
        f(3, i) = wheels[i].heading;  // theta + delta_prev on fronts, theta on rears
    }
    return f;
}

void wheel_edges(const plant::PlantParams& params, std::vector<gnn::Edge>& edges, Mat& feats) {
    const std::array<Vec2, 4> body = {
        Vec2(params.a_front, 0.5 * params.track_width),
        Vec2(params.a_front, -0.5 * params.track_width),
        Vec2(-params.b_rear, 0.5 * params.track_width),
        Vec2(-params.b_rear, -0.5 * params.track_width),
    };
    edges.clear();
    std::vector<double> d;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            if (i == j) continue;
            edges.push_back({i, j});
            d.push_back((body[i] - body[j]).norm());
        }
    feats.resize(1, static_cast<long>(d.size()));
    for (std::size_t k = 0; k < d.size(); ++k) feats(0, static_cast<long>(k)) = d[k];
}

}  // namespace

gnn::HeteroGraph build_model_graph(const EgoState& x_k, double delta_k, double throttle_k,
                                   double delta_prev, const track::ReferencePath& path,
                                   const plant::PlantParams& params, double t_s) {
    gnn::HeteroGraph g;
    g.schema = model_graph_schema();
    g.node_features.resize(2);
    g.node_features[0] = wheel_feature_matrix(x_k, delta_prev, path, params);
    Mat act(1, 2);
    act(0, 0) = delta_k;
    act(0, 1) = throttle_k;
    g.node_features[1] = act;

    g.edge_sets.resize(3);
    wheel_edges(params, g.edge_sets[0].edges, g.edge_sets[0].features);

    auto& aw = g.edge_sets[1];
    for (int a = 0; a < 2; ++a)
        for (int w = 0; w < 4; ++w) aw.edges.push_back({a, w});
    aw.features = Mat::Constant(1, 8, t_s);

    auto& aa = g.edge_sets[2];
    aa.edges = {{0, 1}, {1, 0}};
    aa.features = Mat(0, 2);

    g.validate();
    return g;
}

GvmNet::GvmNet(GvmConfig cfg, Rng& rng) : cfg_(cfg) {
    g2o_ = gnn::G2oNet(model_graph_schema(), cfg_.g2o, rng);
    std::vector<int> widths;
    widths.push_back(6 * cfg_.g2o.out_dim);
    for (int w : cfg_.mlp_hidden) widths.push_back(w);
    widths.push_back(4);
    // Gamma starts at the identity model: unit bias, small head weights
    mlp_ = ad::Mlp(widths, rng, 0.05, 1.0);
}

GvmNet::Prediction GvmNet::predict_on_tape(Tape& t, const EgoState& x_k, Var delta_k,
                                           double throttle_k, double delta_prev,
                                           const track::ReferencePath& path,
                                           const plant::PlantParams& params, bool trainable) const {
    gnn::HeteroGraph g =
        build_model_graph(x_k, t.scalar(delta_k), throttle_k, delta_prev, path, params, cfg_.t_s);

    Var gamma;
    if (gamma_override_) {
        gamma = t.constant(Mat(*gamma_override_));
    } else {
        gnn::NodeVars feats = g2o_.lift(t, g);
        feats[1][0] = delta_k;  // steering actuator node carries the live command
        gnn::NodeVars phi = g2o_.forward(t, g, feats, trainable);
        std::vector<Var> flat;
        for (const auto& type_nodes : phi)
            for (const Var& v : type_nodes) flat.push_back(v);
        gamma = mlp_.forward(t, ad::vcat(flat), trainable);
    }

    Var xdot_b = bicycle_derivative(t, x_k, delta_k, throttle_k, params);
    Var chi_dot = ad::mul(gamma, xdot_b);
    Var xhat = t.constant(Mat(x_k.vec())) + ad::scale(chi_dot, cfg_.t_s);
    return {xhat, gamma};
}

EgoState GvmNet::predict_next(const EgoState& x_k, double delta_k, double throttle_k,
                              double delta_prev, const track::ReferencePath& path,
                              const plant::PlantParams& params) const {
    Tape t;
    Prediction p =
        predict_on_tape(t, x_k, t.constant(delta_k), throttle_k, delta_prev, path, params, false);
    const Mat& v = t.val(p.xhat);
    if (!v.allFinite()) {
        ++health_faults_;
        throw plant::SimulationDiverged("gvm: non-finite prediction");
    }
    return EgoState::from_vec(Vec4(v(0, 0), v(1, 0), v(2, 0), v(3, 0)));
}

std::vector<ad::Parameter*> GvmNet::params() {
    std::vector<ad::Parameter*> out = g2o_.params();
    for (ad::Parameter* p : mlp_.params()) out.push_back(p);
    return out;
}

void GvmNet::save(const std::string& path) const {
    auto* self = const_cast<GvmNet*>(this);
    ad::save_params_file(path, self->params());
    nlohmann::json side;
    side["kind"] = "gvm";
    side["m"] = cfg_.g2o.out_dim;
    side["layers"] = cfg_.g2o.layers;
    side["heads"] = cfg_.g2o.heads;
    side["hidden"] = cfg_.g2o.hidden;
    side["mlp_hidden"] = cfg_.mlp_hidden;
    side["t_s"] = cfg_.t_s;
    side["nodes"] = 6;
    std::ofstream f(path + ".json");
    f << side.dump(2) << "\n";
}

void GvmNet::load(const std::string& path) { ad::load_params_file(path, params()); }

double gvm_update(Tape& t, const GvmNet::Prediction& pred, const EgoState& observed_next,
                  ad::Adam& opt, double threshold) {
    Var e = t.constant(Mat(observed_next.vec())) - pred.xhat;
    // wrap the heading component: shift by a constant so the gradient is the
    // plain chain through xhat
    double raw = t.val(e)(2, 0);
    double shift = wrap_angle(raw) - raw;
    Var e_theta = ad::add_const(ad::block(e, 2, 0, 1, 1), shift);
    std::array<Var, 3> parts = {ad::block(e, 0, 0, 2, 1), e_theta, ad::block(e, 3, 0, 1, 1)};
    Var loss = ad::mean(ad::smooth_l1(ad::vcat(parts)));
    double value = t.scalar(loss);
    if (!std::isfinite(value)) return value;  // skip update, caller sees the NaN
    if (value > threshold) {
        t.backward(loss);
        opt.step();
    }
    return value;
}

std::vector<ControlInput> excitation_schedule(int steps, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ControlInput> out;
    out.reserve(static_cast<std::size_t>(steps));
    const double t_s = 0.1;
    for (int k = 0; k < steps; ++k) {
        double t = k * t_s;
        int segment = (k * 8) / std::max(steps, 1);
        double steer = 0.0;
        double throttle = 0.3;
        switch (segment) {
            case 0:  // straight acceleration
                steer = 0.0;
                throttle = 0.5;
                break;
            case 1:  // gentle weave
                steer = 0.08 * std::sin(2.0 * M_PI * t / 4.0);
                throttle = 0.35;
                break;
            case 2:  // wider sweep
                steer = 0.22 * std::sin(2.0 * M_PI * t / 5.0);
                throttle = 0.3;
                break;
            case 3: {  // chirp
                double f = 0.1 + 0.5 * (t / (steps * t_s));
                steer = 0.15 * std::sin(2.0 * M_PI * f * t);
                throttle = 0.3;
                break;
            }
            case 4:  // throttle steps
                steer = 0.05 * std::sin(2.0 * M_PI * t / 5.0);
                throttle = (k / 50) % 2 == 0 ? 0.15 : 0.55;
                break;
            case 5:  // coast with weave
                steer = 0.25 * std::sin(2.0 * M_PI * t / 6.0);
                throttle = 0.05;
                break;
            case 6:  // square-wave steering
                steer = ((k / 25) % 2 == 0 ? 1.0 : -1.0) * 0.18;
                throttle = 0.3;
                break;
            default:  // large sweep
                steer = 0.3 * std::sin(2.0 * M_PI * t / 5.0);
                throttle = 0.25;
                break;
        }
        steer += 0.01 * rng.normal();  // dither, fixed by seed
        out.push_back({std::clamp(steer, -0.4, 0.4), std::clamp(throttle, 0.0, 1.0)});
    }
    return out;
}

PretrainResult pretrain_gvm(GvmNet& net, ad::Adam& opt, const plant::PlantParams& params,
                            const track::ReferencePath& path, const std::vector<ControlInput>& schedule,
                            int epochs) {
    PretrainResult res;
    res.steps_per_epoch = static_cast<int>(schedule.size());
    for (int epoch = 0; epoch < epochs; ++epoch) {
        plant::PlantState ps;
        Vec2 pos;
        double heading;
        track::pose_at(path, 0.0, pos, heading);
        ps.x = pos.x();
        ps.y = pos.y();
        ps.theta = heading;
        ps.vx = 3.0;  // start rolling
        double delta_prev = 0.0;
        double loss_sum = 0.0;
        int count = 0;
        for (const ControlInput& u0 : schedule) {
            ControlInput u = u0;
            EgoState x_k = plant::observe(ps);
            if (x_k.v > 11.5) u.throttle = 0.0;  // governor: stay inside the envelope

            Tape t;
            GvmNet::Prediction pred = net.predict_on_tape(t, x_k, t.constant(u.steer), u.throttle,
                                                          delta_prev, path, params, true);
            ps = plant::plant_step(ps, u, params, plant::Perturbation::none(), net.config().t_s);
            EgoState x_next = plant::observe(ps);
            double loss = gvm_update(t, pred, x_next, opt, net.config().update_threshold);
            if (std::isfinite(loss)) {
                loss_sum += loss;
                ++count;
            }
            delta_prev = u.steer;
        }
        res.epoch_loss.push_back(count > 0 ? loss_sum / count : 0.0);
    }
    return res;
}

}  // namespace latlab::gvm
