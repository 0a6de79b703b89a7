#pragma once

#include <memory>
#include <optional>

#include "latlab/gvm.hpp"
#include "latlab/metrics.hpp"
#include "latlab/pid.hpp"

namespace latlab::glc {

/// Schema of G_c: 4 current wheel nodes (dim 4), 4 desired wheel nodes
/// (dim 3, velocity removed), bidirectional distance edges within each time
/// slice, and unidirectional current->desired edges carrying t_s.
gnn::GraphSchema control_graph_schema();

/// Current nodes use the model-graph wheel features; desired nodes place
/// the wheel rectangle at (y_d, theta_d) with features relative to the
/// desired Frenet position and heading theta_d on all four wheels.
gnn::HeteroGraph build_control_graph(const EgoState& x_k, const Vec2& y_d, double theta_d,
                                     double delta_prev, const track::ReferencePath& path,
                                     const plant::PlantParams& params, double t_s);

struct GlcConfig {
    gnn::G2oConfig g2o;                      // M_c = g2o.out_dim
    std::vector<int> mlp_hidden = {64, 32};  // MLP_c hidden widths
    double t_s = 0.1;
};

/// Steering head: HardTanh(MLP_c(flatten(phi_desired) - flatten(phi_current))).
class GlcNet {
public:
    GlcNet() = default;
    GlcNet(GlcConfig cfg, Rng& rng);

    ad::Var steer_on_tape(ad::Tape& t, const gnn::HeteroGraph& g_c, bool trainable) const;
    double steer(const gnn::HeteroGraph& g_c) const;

    /// Test hook: replace the MLP output with a fixed value before HardTanh.
    void set_output_override(std::optional<double> v) { output_override_ = v; }

    std::vector<ad::Parameter*> params();
    const GlcConfig& config() const { return cfg_; }

    void save(const std::string& path) const;
    void load(const std::string& path);

private:
    GlcConfig cfg_;
    gnn::G2oNet g2o_;
    ad::Mlp mlp_;
    std::optional<double> output_override_;
};

/// Per-step act/learn pair. act() builds the control graph and the live
/// tape; learn() extends the same tape through the (frozen) GVM, takes one
/// optimizer step and finalizes delta_prev.
class GlcController {
public:
    GlcController(GlcNet net, ad::Adam::Config opt_cfg);

    double act(const EgoState& x_k, const track::DesiredWaypoint& wp,
               const track::ReferencePath& path, const plant::PlantParams& params);

    struct LearnResult {
        double loss = 0.0;
        EgoState predicted;  ///< X_hat_{k+1} from the GVM chain
    };
    /// One Eq.-22 update through the GVM; `update` false evaluates the loss
    /// and prediction without touching the weights.
    LearnResult learn(const gvm::GvmNet& gvm, double throttle, bool update = true);

    void reset(double delta0 = 0.0);
    double delta_prev() const { return delta_prev_; }
    GlcNet& net() { return net_; }
    const GlcNet& net() const { return net_; }
    ad::Adam& optimizer() { return opt_; }
    int health_faults() const { return health_faults_; }

private:
    GlcNet net_;
    ad::Adam opt_;
    std::unique_ptr<ad::Tape> tape_;
    ad::Var delta_var_;
    EgoState x_k_;
    Vec2 y_d_{0.0, 0.0};
    const track::ReferencePath* path_ = nullptr;
    const plant::PlantParams* params_ = nullptr;
    bool pending_ = false;
    double delta_prev_ = 0.0;
    double last_delta_ = 0.0;
    int health_faults_ = 0;
};

struct RunConfig {
    double laps = 2.0;            ///< closed-track episode length
    int max_steps = 60000;
    double fail_offset = 5.0;     ///< |d| beyond this marks the episode failed
    plant::Perturbation pert;
    bool online_learning = true;  ///< both GVM and GLC update every step
};

/// The desired pose for step k+1: the waypoint search runs from the ego's
/// one-step-ahead arc position, matching a time-sampled reference whose
/// spacing equals v * t_s. Searching from s_k directly can return a target
/// closer than one step of travel, whose one-step optimum is bang-bang.
track::DesiredWaypoint desired_for_next_step(const track::ReferencePath& path, const EgoState& x,
                                             double t_s, bool* end_of_path);

/// Closed-loop episode on the plant: observe -> desired waypoint -> steer ->
/// PID throttle -> plant -> GVM one-step learning and GLC learning through
/// the GVM, fully logged.
harness::TraceLog run_online(GlcController& ctl, gvm::GvmNet& gvm, ad::Adam& gvm_opt,
                             const track::ReferencePath& path, const plant::PlantParams& params,
                             const RunConfig& cfg);

struct GlcPretrainResult {
    std::vector<double> epoch_loss;
    int resets = 0;
};

/// Closed-loop pre-training entirely inside the GVM: the plant is never
/// touched; the predicted state feeds the next control graph. Episodes
/// re-place the rollout on the centerline when |d| exceeds reset_offset.
/// The optimizer's learning rate anneals by lr_decay each epoch.
GlcPretrainResult pretrain_glc(GlcController& ctl, const gvm::GvmNet& gvm,
                               const std::vector<const track::ReferencePath*>& tracks,
                               const plant::PlantParams& params, int epochs,
                               double reset_offset = 3.0, double lr_decay = 0.6);

}  // namespace latlab::glc
