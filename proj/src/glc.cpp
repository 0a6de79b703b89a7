#include "latlab/glc.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace latlab::glc {

using ad::Tape;
using ad::Var;

gnn::GraphSchema control_graph_schema() {
    gnn::GraphSchema s;
    s.node_types = {{"current", 4, 4}, {"desired", 4, 3}};
    s.edge_types = {{"current_current", "current", "current", 1},
                    {"desired_desired", "desired", "desired", 1},
                    {"current_desired", "current", "desired", 1}};
    return s;
}

namespace {

void rectangle_edges(const plant::PlantParams& params, std::vector<gnn::Edge>& edges, Mat& feats) {
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

double seam_aware(double ds, const track::ReferencePath& path) {
    if (!path.closed) return ds;
    if (ds > 0.5 * path.total_length) return ds - path.total_length;
    if (ds < -0.5 * path.total_length) return ds + path.total_length;
    return ds;
}

}  // namespace

track::DesiredWaypoint desired_for_next_step(const track::ReferencePath& path, const EgoState& x,
                                             double t_s, bool* end_of_path) {
    EgoState ahead = x;
    ahead.x += x.v * t_s * std::cos(x.theta);
    ahead.y += x.v * t_s * std::sin(x.theta);
    auto wp = track::desired_waypoint(path, ahead);
    if (!wp) {
        if (end_of_path) *end_of_path = true;
        return {};
    }
    if (end_of_path) *end_of_path = false;
    return *wp;
}

gnn::HeteroGraph build_control_graph(const EgoState& x_k, const Vec2& y_d, double theta_d,
                                     double delta_prev, const track::ReferencePath& path,
                                     const plant::PlantParams& params, double t_s) {
    gnn::HeteroGraph g;
    g.schema = control_graph_schema();
    g.node_features.resize(2);

    // current slice: exactly the model-graph wheel features
    {
        auto wheels = plant::wheel_poses(x_k, params, delta_prev);
        track::FrenetCoord cw = track::frenet_coordinate(path, Vec2(x_k.x, x_k.y));
        Mat f(4, 4);
        for (int i = 0; i < 4; ++i) {
            track::FrenetCoord wf = track::frenet_coordinate(path, wheels[i].position);
            f(0, i) = seam_aware(wf.s - cw.s, path);
            f(1, i) = wf.d - cw.d;
            f(2, i) = x_k.v;
            f(3, i) = wheels[i].heading;
        }
        g.node_features[0] = f;
    }

    // desired slice: the wheel rectangle at the desired pose, no velocity
    {
        // keep the desired heading on the same branch as the ego's
        double theta_feat = x_k.theta + wrap_angle(theta_d - x_k.theta);
        EgoState desired{y_d.x(), y_d.y(), theta_d, 0.0};
        auto wheels = plant::wheel_poses(desired, params, 0.0);
        track::FrenetCoord dw = track::frenet_coordinate(path, y_d);
        Mat f(3, 4);
        for (int i = 0; i < 4; ++i) {
            track::FrenetCoord wf = track::frenet_coordinate(path, wheels[i].position);
            f(0, i) = seam_aware(wf.s - dw.s, path);
            f(1, i) = wf.d - dw.d;
            f(2, i) = theta_feat;
        }
        g.node_features[1] = f;
    }

    g.edge_sets.resize(3);
    rectangle_edges(params, g.edge_sets[0].edges, g.edge_sets[0].features);
    g.edge_sets[1] = g.edge_sets[0];
    auto& cd = g.edge_sets[2];
    for (int i = 0; i < 4; ++i) cd.edges.push_back({i, i});  // each wheel to its future self
    cd.features = Mat::Constant(1, 4, t_s);

    g.validate();
    return g;
}

GlcNet::GlcNet(GlcConfig cfg, Rng& rng) : cfg_(cfg) {
    g2o_ = gnn::G2oNet(control_graph_schema(), cfg_.g2o, rng);
    std::vector<int> widths;
    widths.push_back(4 * cfg_.g2o.out_dim);
    for (int w : cfg_.mlp_hidden) widths.push_back(w);
    widths.push_back(1);
    // near-zero head: the initial policy steers almost straight, which keeps
    // early rollouts on the track and HardTanh inside its linear band
    mlp_ = ad::Mlp(widths, rng, 0.005, 0.0);
}

Var GlcNet::steer_on_tape(Tape& t, const gnn::HeteroGraph& g_c, bool trainable) const {
    Var raw;
    if (output_override_) {
        raw = t.constant(*output_override_);
    } else {
        gnn::NodeVars phi = g2o_.forward(t, g_c, g2o_.lift(t, g_c), trainable);
        std::vector<Var> current(phi[0].begin(), phi[0].end());
        std::vector<Var> desired(phi[1].begin(), phi[1].end());
        Var diff = ad::vcat(desired) - ad::vcat(current);
        raw = mlp_.forward(t, diff, trainable);
    }
    return ad::hard_tanh(raw);
}

double GlcNet::steer(const gnn::HeteroGraph& g_c) const {
    Tape t;
    return t.scalar(steer_on_tape(t, g_c, false));
}

std::vector<ad::Parameter*> GlcNet::params() {
    std::vector<ad::Parameter*> out = g2o_.params();
    for (ad::Parameter* p : mlp_.params()) out.push_back(p);
    return out;
}

void GlcNet::save(const std::string& path) const {
    auto* self = const_cast<GlcNet*>(this);
    ad::save_params_file(path, self->params());
    nlohmann::json side;
    side["kind"] = "glc";
    side["m"] = cfg_.g2o.out_dim;
    side["layers"] = cfg_.g2o.layers;
    side["heads"] = cfg_.g2o.heads;
    side["hidden"] = cfg_.g2o.hidden;
    side["mlp_hidden"] = cfg_.mlp_hidden;
    side["t_s"] = cfg_.t_s;
    side["nodes"] = 8;
    std::ofstream f(path + ".json");
    f << side.dump(2) << "\n";
}

void GlcNet::load(const std::string& path) { ad::load_params_file(path, params()); }

GlcController::GlcController(GlcNet net, ad::Adam::Config opt_cfg)
    : net_(std::move(net)), opt_(opt_cfg) {
    opt_.attach(net_.params());
}

double GlcController::act(const EgoState& x_k, const track::DesiredWaypoint& wp,
                          const track::ReferencePath& path, const plant::PlantParams& params) {
    tape_ = std::make_unique<Tape>();
    gnn::HeteroGraph g_c =
        build_control_graph(x_k, wp.position, wp.heading, delta_prev_, path, params, net_.config().t_s);
    delta_var_ = net_.steer_on_tape(*tape_, g_c, true);
    double delta = tape_->scalar(delta_var_);
    if (!std::isfinite(delta)) {
        ++health_faults_;
        tape_.reset();
        pending_ = false;
        last_delta_ = delta_prev_;  // safe fallback: hold the previous command
        return delta_prev_;
    }
    x_k_ = x_k;
    y_d_ = wp.position;
    path_ = &path;
    params_ = &params;
    pending_ = true;
    last_delta_ = delta;
    return delta;
}

GlcController::LearnResult GlcController::learn(const gvm::GvmNet& gvm, double throttle, bool update) {
    LearnResult out;
    if (!pending_) {
        delta_prev_ = last_delta_;
        out.predicted = x_k_;
        return out;
    }
    Tape& t = *tape_;
    gvm::GvmNet::Prediction pred =
        gvm.predict_on_tape(t, x_k_, delta_var_, throttle, delta_prev_, *path_, *params_, false);
    Var pos_hat = ad::block(pred.xhat, 0, 0, 2, 1);
    Var e_c = t.constant(Mat(y_d_)) - pos_hat;
    Var loss = ad::mean(ad::smooth_l1(e_c));
    out.loss = t.scalar(loss);

    const Mat& xv = t.val(pred.xhat);
    out.predicted = EgoState{xv(0, 0), xv(1, 0), wrap_angle(xv(2, 0)), xv(3, 0)};

    if (update && std::isfinite(out.loss)) {
        t.backward(loss);
        opt_.step();
    }
    delta_prev_ = last_delta_;
    pending_ = false;
    tape_.reset();
    return out;
}

void GlcController::reset(double delta0) {
    delta_prev_ = delta0;
    last_delta_ = delta0;
    pending_ = false;
    tape_.reset();
}

harness::TraceLog run_online(GlcController& ctl, gvm::GvmNet& gvm, ad::Adam& gvm_opt,
                             const track::ReferencePath& path, const plant::PlantParams& params,
                             const RunConfig& cfg) {
    harness::TraceLog log;
    log.t_s = gvm.config().t_s;
    log.lap_length = path.total_length;

    plant::PlantState ps;
    {
        Vec2 pos;
        double heading;
        track::pose_at(path, 0.0, pos, heading);
        ps.x = pos.x();
        ps.y = pos.y();
        ps.theta = heading;
        ps.vx = path.velocities.empty() ? 10.0 : path.velocities.front();
    }
    ctrl::Pid pid;
    double t_s = log.t_s;
    double progress = 0.0;
    double s_prev = 0.0;
    bool have_s_prev = false;
    EgoState xhat_next = plant::observe(ps);  // row 0 copies the observation
    double loss_m = 0.0;

    for (int k = 0; k < cfg.max_steps; ++k) {
        EgoState x_k = plant::observe(ps);
        bool exhausted = false;
        track::DesiredWaypoint wp = desired_for_next_step(path, x_k, t_s, &exhausted);
        if (exhausted) break;  // open track exhausted

        track::FrenetCoord fc = track::frenet_coordinate(path, Vec2(x_k.x, x_k.y));
        if (have_s_prev) {
            double ds = fc.s - s_prev;
            if (path.closed) {
                if (ds < -0.5 * path.total_length) ds += path.total_length;
                if (ds > 0.5 * path.total_length) ds -= path.total_length;
            }
            progress += ds;
        }
        s_prev = fc.s;
        have_s_prev = true;

        double delta = ctl.act(x_k, wp, path, params);
        double delta_prev_k = ctl.delta_prev();  // still delta_{k-1}; learn() advances it
        double throttle = pid.update(wp.velocity, x_k.v, t_s);

        ControlInput u{delta, throttle};
        ps = plant::plant_step(ps, u, params, cfg.pert, t_s);
        EgoState x_next = plant::observe(ps);

        auto learn_res = ctl.learn(gvm, throttle, cfg.online_learning);

        Tape t;
        gvm::GvmNet::Prediction pred = gvm.predict_on_tape(t, x_k, t.constant(delta), throttle,
                                                           delta_prev_k, path, params,
                                                           cfg.online_learning);
        loss_m = gvm_update(t, pred, x_next, gvm_opt,
                            cfg.online_learning ? gvm.config().update_threshold
                                                : std::numeric_limits<double>::infinity());
        const Mat& xv = t.val(pred.xhat);

        harness::TraceRow row;
        row.t = k * t_s;
        row.x = x_k.x;
        row.y = x_k.y;
        row.theta = x_k.theta;
        row.v = x_k.v;
        row.x_hat = xhat_next.x;
        row.y_hat = xhat_next.y;
        row.theta_hat = xhat_next.theta;
        row.v_hat = xhat_next.v;
        row.delta = delta;
        row.delta_eff = std::clamp(delta, -params.max_steer, params.max_steer) + cfg.pert.steer_bias;
        row.throttle = throttle;
        row.yd_x = wp.position.x();
        row.yd_y = wp.position.y();
        row.d_err = fc.d;
        row.kappa_class =
            track::classify_curvature(path.curvatures[static_cast<std::size_t>(wp.index)]) ==
                    track::SegmentClass::Turn
                ? 1
                : 0;
        row.loss_m = loss_m;
        row.loss_c = learn_res.loss;
        log.rows.push_back(row);
        log.progress.push_back(progress);

        xhat_next = EgoState{xv(0, 0), xv(1, 0), wrap_angle(xv(2, 0)), xv(3, 0)};

        if (std::abs(fc.d) > cfg.fail_offset) {
            log.failed = true;
            break;
        }
        if (path.closed && progress >= cfg.laps * path.total_length) break;
    }
    return log;
}

GlcPretrainResult pretrain_glc(GlcController& ctl, const gvm::GvmNet& gvm,
                               const std::vector<const track::ReferencePath*>& tracks,
                               const plant::PlantParams& params, int epochs, double reset_offset,
                               double lr_decay) {
    GlcPretrainResult res;
    double t_s = gvm.config().t_s;
    double lr0 = ctl.optimizer().lr();
    for (int epoch = 0; epoch < epochs; ++epoch) {
        ctl.optimizer().set_lr(lr0 * std::pow(lr_decay, epoch));
        double loss_sum = 0.0;
        int count = 0;
        for (const track::ReferencePath* path : tracks) {
            double v0 = path->velocities.empty() ? 10.0 : path->velocities.front();
            int steps = static_cast<int>(std::ceil(path->total_length / (v0 * t_s)));
            Vec2 pos;
            double heading;
            track::pose_at(*path, 0.0, pos, heading);
            EgoState x{pos.x(), pos.y(), heading, v0};
            ctrl::Pid pid;
            ctl.reset();
            for (int k = 0; k < steps; ++k) {
                bool exhausted = false;
                track::DesiredWaypoint wp = desired_for_next_step(*path, x, t_s, &exhausted);
                if (exhausted) break;
                double delta = ctl.act(x, wp, *path, params);
                double throttle = pid.update(wp.velocity, x.v, t_s);
                auto lr = ctl.learn(gvm, throttle, true);
                (void)delta;
                loss_sum += lr.loss;
                ++count;
                x = lr.predicted;
                track::FrenetCoord fc = track::frenet_coordinate(*path, Vec2(x.x, x.y));
                if (std::abs(fc.d) > reset_offset || !std::isfinite(x.v) || x.v < 0.5 || x.v > 20.0) {
                    // rollout left the trust region: re-place on the centerline
                    track::pose_at(*path, fc.s, pos, heading);
                    x = EgoState{pos.x(), pos.y(), heading, v0};
                    pid.reset();
                    ctl.reset();
                    ++res.resets;
                }
            }
        }
        res.epoch_loss.push_back(count > 0 ? loss_sum / count : 0.0);
    }
    return res;
}

}  // namespace latlab::glc
