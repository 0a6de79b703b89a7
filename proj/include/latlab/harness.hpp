#pragma once

#include <string>
#include <vector>

#include "latlab/glc.hpp"
#include "latlab/mpc.hpp"
#include "latlab/stanley.hpp"

namespace latlab::harness {

plant::Perturbation parse_perturbation(const std::string& name);

/// Closed-loop episode for the non-learning baselines (MPC / Stanley).
TraceLog run_baseline(const std::string& controller, const track::ReferencePath& path,
                      const plant::PlantParams& params, const glc::RunConfig& cfg,
                      const ctrl::MpcConfig& mpc_cfg = {});

struct SuiteConfig {
    std::vector<std::string> controllers = {"glc", "mpc", "stanley"};
    std::vector<std::string> tracks = {"oval:r=30,straight=200",
                                       "chicane:r=30,straight=250,amp=3,cycles=3",
                                       "random_circuit:seed=5,radius=70"};
    std::vector<std::string> perturbations = {"none", "d1+", "d2"};
    std::string profile = "a";
    double laps = 2.0;
    std::uint64_t seed = 42;
    int gvm_epochs = 5;
    int glc_epochs = 6;
    int excitation_steps = 2000;
    std::string pretrain_track = "straight:length=3000";
    std::string glc_pretrain_track;  ///< empty: first suite track
    std::string outdir = "out";
    std::string gvm_ckpt;  ///< optional: load instead of pre-training
    std::string glc_ckpt;
    double online_lr = 1e-4;
    double pretrain_lr = 1e-3;
};

SuiteConfig load_suite_config(const std::string& json_path);

struct SummaryRow {
    std::string controller, track, pert, profile;
    std::uint64_t seed = 0;
    int steps = 0;
    bool failed = false;
    MetricsReport metrics;
    double gvm_pos_rmse = 0.0;
};

struct SuiteResult {
    std::vector<SummaryRow> rows;
    std::string summary_path;
};

/// Run the full controller x track x perturbation matrix; one trace CSV per
/// episode plus a summary CSV. Deterministic for a fixed config and seed.
SuiteResult run_suite(const SuiteConfig& cfg);

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows);

/// Default network stacks used by the suite, CLI and acceptance runs.
gvm::GvmConfig default_gvm_config();
glc::GlcConfig default_glc_config();

}  // namespace latlab::harness
