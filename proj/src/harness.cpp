#include "latlab/harness.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace latlab::harness {

plant::Perturbation parse_perturbation(const std::string& name) {
    if (name == "none" || name.empty()) return plant::Perturbation::none();
    if (name == "d1+" || name == "d1") return plant::Perturbation::d1(2.5 * M_PI / 180.0);
    if (name == "d1-") return plant::Perturbation::d1(-2.5 * M_PI / 180.0);
    if (name == "d2") return plant::Perturbation::d2(0.5);
    throw std::invalid_argument("unknown perturbation '" + name + "'");
}

TraceLog run_baseline(const std::string& controller, const track::ReferencePath& path,
                      const plant::PlantParams& params, const glc::RunConfig& cfg,
                      const ctrl::MpcConfig& mpc_cfg) {
    bool use_mpc = controller == "mpc";
    if (!use_mpc && controller != "stanley")
        throw std::invalid_argument("run_baseline: unknown controller '" + controller + "'");

    TraceLog log;
    log.t_s = use_mpc ? mpc_cfg.t_s : 0.1;
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

    ctrl::MpcController mpc(mpc_cfg, params);
    ctrl::Pid pid;
    double t_s = log.t_s;
    double progress = 0.0, s_prev = 0.0;
    bool have_s_prev = false;
    double delta_prev = 0.0;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    for (int k = 0; k < cfg.max_steps; ++k) {
        EgoState x_k = plant::observe(ps);
        auto wp = track::desired_waypoint(path, x_k);
        if (!wp) break;

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

        double throttle = pid.update(wp->velocity, x_k.v, t_s);
        double delta = use_mpc ? mpc.solve(x_k, path, throttle)
                               : ctrl::stanley_steer(x_k, path, 1.0, params);

        ps = plant::plant_step(ps, {delta, throttle}, params, cfg.pert, t_s);

        TraceRow row;
        row.t = k * t_s;
        row.x = x_k.x;
        row.y = x_k.y;
        row.theta = x_k.theta;
        row.v = x_k.v;
        row.x_hat = nan;
        row.y_hat = nan;
        row.theta_hat = nan;
        row.v_hat = nan;
        row.delta = delta;
        row.delta_eff = std::clamp(delta, -params.max_steer, params.max_steer) + cfg.pert.steer_bias;
        row.throttle = throttle;
        row.yd_x = wp->position.x();
        row.yd_y = wp->position.y();
        row.d_err = fc.d;
        row.kappa_class =
            track::classify_curvature(path.curvatures[static_cast<std::size_t>(wp->index)]) ==
                    track::SegmentClass::Turn
                ? 1
                : 0;
        row.loss_m = 0.0;
        row.loss_c = 0.0;
        log.rows.push_back(row);
        log.progress.push_back(progress);
        delta_prev = delta;
        (void)delta_prev;

        if (std::abs(fc.d) > cfg.fail_offset) {
            log.failed = true;
            break;
        }
        if (path.closed && progress >= cfg.laps * path.total_length) break;
    }
    return log;
}

gvm::GvmConfig default_gvm_config() {
    gvm::GvmConfig cfg;
    cfg.g2o.layers = 2;
    cfg.g2o.heads = 2;
    cfg.g2o.hidden = 32;
    cfg.g2o.out_dim = 16;
    cfg.mlp_hidden = {64, 32};
    return cfg;
}

glc::GlcConfig default_glc_config() {
    glc::GlcConfig cfg;
    cfg.g2o.layers = 2;
    cfg.g2o.heads = 2;
    cfg.g2o.hidden = 32;
    cfg.g2o.out_dim = 16;
    cfg.mlp_hidden = {64, 32};
    return cfg;
}

SuiteConfig load_suite_config(const std::string& json_path) {
    SuiteConfig cfg;
    if (json_path.empty()) return cfg;
    std::ifstream f(json_path);
    if (!f) throw std::runtime_error("suite: cannot open config " + json_path);
    nlohmann::json j;
    f >> j;
    if (j.contains("controllers")) cfg.controllers = j["controllers"].get<std::vector<std::string>>();
    if (j.contains("tracks")) cfg.tracks = j["tracks"].get<std::vector<std::string>>();
    if (j.contains("perturbations"))
        cfg.perturbations = j["perturbations"].get<std::vector<std::string>>();
    if (j.contains("profile")) cfg.profile = j["profile"].get<std::string>();
    if (j.contains("laps")) cfg.laps = j["laps"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("gvm_epochs")) cfg.gvm_epochs = j["gvm_epochs"].get<int>();
    if (j.contains("glc_epochs")) cfg.glc_epochs = j["glc_epochs"].get<int>();
    if (j.contains("excitation_steps")) cfg.excitation_steps = j["excitation_steps"].get<int>();
    if (j.contains("pretrain_track")) cfg.pretrain_track = j["pretrain_track"].get<std::string>();
    if (j.contains("glc_pretrain_track"))
        cfg.glc_pretrain_track = j["glc_pretrain_track"].get<std::string>();
    if (j.contains("outdir")) cfg.outdir = j["outdir"].get<std::string>();
    if (j.contains("gvm_ckpt")) cfg.gvm_ckpt = j["gvm_ckpt"].get<std::string>();
    if (j.contains("glc_ckpt")) cfg.glc_ckpt = j["glc_ckpt"].get<std::string>();
    if (j.contains("online_lr")) cfg.online_lr = j["online_lr"].get<double>();
    if (j.contains("pretrain_lr")) cfg.pretrain_lr = j["pretrain_lr"].get<double>();
    return cfg;
}

namespace {

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '-');
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("suite: cannot open " + path + " for write");
    f << "controller,track,pert,profile,seed,steps,failed,mle_straight,mle_turn,mle_overall,"
         "rmse_straight,rmse_turn,rmse_overall,max_steer_velocity,mean_signed_err,gvm_pos_rmse,"
         "rmse_lap1,rmse_lap_last\n";
    for (const SummaryRow& r : rows) {
        const MetricsReport& m = r.metrics;
        double lap1 = m.lap_rmse.empty() ? 0.0 : m.lap_rmse.front();
        double lapn = m.lap_rmse.empty() ? 0.0 : m.lap_rmse.back();
        f << r.controller << ',' << sanitize(r.track) << ',' << r.pert << ',' << r.profile << ','
          << r.seed << ',' << r.steps << ',' << (r.failed ? 1 : 0) << ',' << fmt(m.mle_straight)
          << ',' << fmt(m.mle_turn) << ',' << fmt(m.mle_overall) << ',' << fmt(m.rmse_straight)
          << ',' << fmt(m.rmse_turn) << ',' << fmt(m.rmse_overall) << ','
          << fmt(m.max_steering_velocity) << ',' << fmt(m.mean_signed_error) << ','
          << fmt(r.gvm_pos_rmse) << ',' << fmt(lap1) << ',' << fmt(lapn) << "\n";
    }
}

SuiteResult run_suite(const SuiteConfig& cfg_in) {
    SuiteConfig cfg = cfg_in;
    if (const char* env = std::getenv("LATLAB_OUT_DIR"); env && *env) cfg.outdir = env;
    std::filesystem::create_directories(cfg.outdir);

    plant::PlantParams params = plant::profile(cfg.profile);

    bool need_glc = false;
    for (const auto& c : cfg.controllers) need_glc = need_glc || c == "glc";

    // one pretrained snapshot shared by every GLC cell
    Rng rng(cfg.seed);
    Rng gvm_rng = rng.fork();
    Rng glc_rng = rng.fork();
    gvm::GvmNet gvm_snapshot(default_gvm_config(), gvm_rng);
    glc::GlcNet glc_snapshot(default_glc_config(), glc_rng);

    if (need_glc) {
        if (!cfg.gvm_ckpt.empty()) {
            gvm_snapshot.load(cfg.gvm_ckpt);
        } else {
            ad::Adam opt({cfg.pretrain_lr});
            opt.attach(gvm_snapshot.params());
            track::ReferencePath straight = track::load_track(cfg.pretrain_track);
            auto schedule = gvm::excitation_schedule(cfg.excitation_steps, cfg.seed);
            gvm::pretrain_gvm(gvm_snapshot, opt, params, straight, schedule, cfg.gvm_epochs);
            gvm_snapshot.save(cfg.outdir + "/gvm_pretrained.ckpt");
        }
        if (!cfg.glc_ckpt.empty()) {
            glc_snapshot.load(cfg.glc_ckpt);
        } else {
            std::string glc_track =
                cfg.glc_pretrain_track.empty() ? cfg.tracks.front() : cfg.glc_pretrain_track;
            track::ReferencePath path = track::load_track(glc_track);
            glc::GlcController ctl(glc_snapshot, {cfg.pretrain_lr});
            std::vector<const track::ReferencePath*> tracks = {&path};
            glc::pretrain_glc(ctl, gvm_snapshot, tracks, params, cfg.glc_epochs);
            glc_snapshot = ctl.net();
            glc_snapshot.save(cfg.outdir + "/glc_pretrained.ckpt");
        }
    }

    SuiteResult result;
    for (const std::string& controller : cfg.controllers) {
        for (const std::string& track_spec : cfg.tracks) {
            track::ReferencePath path = track::load_track(track_spec);
            for (const std::string& pert_name : cfg.perturbations) {
                glc::RunConfig run_cfg;
                run_cfg.laps = cfg.laps;
                run_cfg.pert = parse_perturbation(pert_name);

                TraceLog trace;
                if (controller == "glc") {
                    gvm::GvmNet gvm_copy = gvm_snapshot;
                    glc::GlcController ctl(glc_snapshot, {cfg.online_lr});
                    ad::Adam gvm_opt({cfg.online_lr});
                    gvm_opt.attach(gvm_copy.params());
                    trace = glc::run_online(ctl, gvm_copy, gvm_opt, path, params, run_cfg);
                } else {
                    trace = run_baseline(controller, path, params, run_cfg);
                }

                SummaryRow row;
                row.controller = controller;
                row.track = track_spec;
                row.pert = pert_name;
                row.profile = cfg.profile;
                row.seed = cfg.seed;
                row.steps = static_cast<int>(trace.size());
                row.failed = trace.failed;
                row.metrics = compute_metrics(trace);
                row.gvm_pos_rmse = controller == "glc" ? gvm_accuracy_report(trace) : 0.0;
                result.rows.push_back(row);

                std::string trace_path = cfg.outdir + "/trace_" + controller + "_" +
                                         sanitize(track_spec) + "_" + sanitize(pert_name) + ".csv";
                write_trace_csv(trace_path, trace);
            }
        }
    }

    result.summary_path = cfg.outdir + "/summary.csv";
    write_summary_csv(result.summary_path, result.rows);
    return result;
}

}  // namespace latlab::harness
