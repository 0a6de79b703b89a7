// latlab command line: pre-training, single episodes, the experiment suite
// and trace reporting.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "latlab/harness.hpp"

using namespace latlab;

namespace {

void print_metrics(const harness::MetricsReport& m, double gvm_rmse, bool has_gvm) {
    std::printf("MLE  straight %.4f  turn %.4f  overall %.4f  [m]\n", m.mle_straight, m.mle_turn,
                m.mle_overall);
    std::printf("RMSE straight %.4f  turn %.4f  overall %.4f  [m]\n", m.rmse_straight, m.rmse_turn,
                m.rmse_overall);
    std::printf("max steering velocity %.4f rad/s, mean signed error %.4f m\n",
                m.max_steering_velocity, m.mean_signed_error);
    if (has_gvm) std::printf("GVM position RMSE %.4f m\n", gvm_rmse);
    for (std::size_t i = 0; i < m.lap_rmse.size(); ++i)
        std::printf("lap %zu: RMSE %.4f m, mean signed %.4f m\n", i + 1, m.lap_rmse[i],
                    m.lap_mean_signed[i]);
    if (m.failed) std::printf("episode FAILED (lateral error bound exceeded)\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latlab: online self-learning graph-based lateral control laboratory"};
    app.require_subcommand(1);

    // ---- pretrain-gvm ----
    auto* pg = app.add_subcommand("pretrain-gvm", "pre-train the graph vehicle model");
    std::string pg_track = "straight:length=3000", pg_profile = "a", pg_out = "gvm.ckpt";
    int pg_epochs = 5, pg_steps = 2000;
    std::uint64_t pg_seed = 1;
    double pg_lr = 1e-3;
    pg->add_option("--track", pg_track, "track CSV or generator spec");
    pg->add_option("--profile", pg_profile, "vehicle profile (a|b|c)");
    pg->add_option("--epochs", pg_epochs);
    pg->add_option("--steps", pg_steps, "excitation schedule length");
    pg->add_option("--seed", pg_seed);
    pg->add_option("--lr", pg_lr);
    pg->add_option("--out", pg_out);

    // ---- pretrain-glc ----
    auto* pc = app.add_subcommand("pretrain-glc", "pre-train the controller inside the GVM");
    std::string pc_track = "oval:r=30,straight=200", pc_profile = "a", pc_out = "glc.ckpt",
                pc_gvm = "gvm.ckpt";
    int pc_epochs = 6;
    std::uint64_t pc_seed = 1;
    double pc_lr = 1e-3;
    pc->add_option("--track", pc_track);
    pc->add_option("--profile", pc_profile);
    pc->add_option("--epochs", pc_epochs);
    pc->add_option("--seed", pc_seed);
    pc->add_option("--lr", pc_lr);
    pc->add_option("--gvm-ckpt", pc_gvm)->required();
    pc->add_option("--out", pc_out);

    // ---- run ----
    auto* run = app.add_subcommand("run", "run one closed-loop episode");
    std::string run_controller = "glc", run_track = "oval:r=30,straight=200", run_profile = "a";
    std::string run_pert = "none", run_gvm, run_glc, run_out = "trace.csv";
    int run_steps = 0;
    double run_laps = 2.0, run_lr = 1e-4;
    std::uint64_t run_seed = 1;
    run->add_option("--controller", run_controller, "glc|mpc|stanley");
    run->add_option("--track", run_track);
    run->add_option("--profile", run_profile);
    run->add_option("--pert", run_pert, "none|d1+|d1-|d2");
    run->add_option("--steps", run_steps, "step cap (0 = laps only)");
    run->add_option("--laps", run_laps);
    run->add_option("--seed", run_seed);
    run->add_option("--lr", run_lr, "online learning rate");
    run->add_option("--gvm-ckpt", run_gvm);
    run->add_option("--glc-ckpt", run_glc);
    run->add_option("--out", run_out);

    // ---- suite ----
    auto* suite = app.add_subcommand("suite", "run the controller x track x perturbation matrix");
    std::string suite_config, suite_outdir;
    std::uint64_t suite_seed = 0;
    bool suite_have_seed = false;
    suite->add_option("--config", suite_config, "JSON config (defaults when omitted)");
    suite->add_option("--outdir", suite_outdir);
    suite->add_option("--seed", suite_seed)->each([&](const std::string&) { suite_have_seed = true; });

    // ---- report ----
    auto* rep = app.add_subcommand("report", "recompute metrics from a trace CSV");
    std::string rep_trace, rep_track;
    rep->add_option("--trace", rep_trace)->required();
    rep->add_option("--track", rep_track, "track spec, enables per-lap metrics");

    CLI11_PARSE(app, argc, argv);

    try {
        if (pg->parsed()) {
            Rng rng(pg_seed);
            gvm::GvmNet net(harness::default_gvm_config(), rng);
            ad::Adam opt({pg_lr});
            opt.attach(net.params());
            auto path = track::load_track(pg_track);
            auto params = plant::profile(pg_profile);
            auto schedule = gvm::excitation_schedule(pg_steps, pg_seed);
            auto res = gvm::pretrain_gvm(net, opt, params, path, schedule, pg_epochs);
            net.save(pg_out);
            for (std::size_t e = 0; e < res.epoch_loss.size(); ++e)
                std::printf("epoch %zu: mean loss %.6g\n", e + 1, res.epoch_loss[e]);
            std::printf("saved %s\n", pg_out.c_str());
        } else if (pc->parsed()) {
            Rng rng(pc_seed);
            gvm::GvmNet gvm_net(harness::default_gvm_config(), rng);
            gvm_net.load(pc_gvm);
            Rng glc_rng = rng.fork();
            glc::GlcNet net(harness::default_glc_config(), glc_rng);
            ad::Adam::Config oc; oc.lr = pc_lr; oc.clip_norm = 1.0;
            glc::GlcController ctl(net, oc);
            auto path = track::load_track(pc_track);
            auto params = plant::profile(pc_profile);
            std::vector<const track::ReferencePath*> tracks = {&path};
            auto res = glc::pretrain_glc(ctl, gvm_net, tracks, params, pc_epochs);
            ctl.net().save(pc_out);
            for (std::size_t e = 0; e < res.epoch_loss.size(); ++e)
                std::printf("epoch %zu: mean loss %.6g\n", e + 1, res.epoch_loss[e]);
            std::printf("resets: %d\nsaved %s\n", res.resets, pc_out.c_str());
        } else if (run->parsed()) {
            auto path = track::load_track(run_track);
            auto params = plant::profile(run_profile);
            glc::RunConfig cfg;
            cfg.laps = run_laps;
            cfg.pert = harness::parse_perturbation(run_pert);
            if (run_steps > 0) cfg.max_steps = run_steps;
            harness::TraceLog trace;
            bool is_glc = run_controller == "glc";
            if (is_glc) {
                Rng rng(run_seed);
                Rng gvm_rng = rng.fork();
                Rng glc_rng = rng.fork();
                gvm::GvmNet gvm_net(harness::default_gvm_config(), gvm_rng);
                glc::GlcNet glc_net(harness::default_glc_config(), glc_rng);
                if (!run_gvm.empty()) gvm_net.load(run_gvm);
                if (!run_glc.empty()) glc_net.load(run_glc);
                glc::GlcController ctl(glc_net, {run_lr});
                ad::Adam gvm_opt({run_lr});
                gvm_opt.attach(gvm_net.params());
                trace = glc::run_online(ctl, gvm_net, gvm_opt, path, params, cfg);
            } else {
                trace = harness::run_baseline(run_controller, path, params, cfg);
            }
            harness::write_trace_csv(run_out, trace);
            auto m = harness::compute_metrics(trace);
            print_metrics(m, harness::gvm_accuracy_report(trace), is_glc);
            std::printf("wrote %s (%zu steps)\n", run_out.c_str(), trace.size());
        } else if (suite->parsed()) {
            harness::SuiteConfig cfg = harness::load_suite_config(suite_config);
            if (!suite_outdir.empty()) cfg.outdir = suite_outdir;
            if (suite_have_seed) cfg.seed = suite_seed;
            auto result = harness::run_suite(cfg);
            std::printf("wrote %s (%zu rows)\n", result.summary_path.c_str(), result.rows.size());
        } else if (rep->parsed()) {
            harness::TraceLog trace = harness::read_trace_csv(rep_trace);
            if (!rep_track.empty()) {
                auto path = track::load_track(rep_track);
                trace.lap_length = path.total_length;
                double progress = 0.0, s_prev = 0.0;
                bool have_prev = false;
                for (const auto& row : trace.rows) {
                    auto fc = track::frenet_coordinate(path, Vec2(row.x, row.y));
                    if (have_prev) {
                        double ds = fc.s - s_prev;
                        if (path.closed) {
                            if (ds < -0.5 * path.total_length) ds += path.total_length;
                            if (ds > 0.5 * path.total_length) ds -= path.total_length;
                        }
                        progress += ds;
                    }
                    s_prev = fc.s;
                    have_prev = true;
                    trace.progress.push_back(progress);
                }
            }
            auto m = harness::compute_metrics(trace);
            print_metrics(m, harness::gvm_accuracy_report(trace), true);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
