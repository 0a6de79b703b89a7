#pragma once

#include <optional>

#include "latlab/gat.hpp"
#include "latlab/plant.hpp"
#include "latlab/track.hpp"

namespace latlab::gvm {

/// Kinematic bicycle state derivative [xdot, ydot, thetadot, vdot] with the
/// fitted throttle map and aerodynamic drag in the acceleration channel.
Vec4 bicycle_derivative(const EgoState& x, double delta, double throttle,
                        const plant::PlantParams& params);

/// Tape form of the same derivative; differentiable w.r.t. `delta`.
ad::Var bicycle_derivative(ad::Tape& t, const EgoState& x, ad::Var delta, double throttle,
                           const plant::PlantParams& params);

/// Schema of G_m: 4 wheel nodes (dim 4), 2 actuator nodes (dim 1),
/// wheel<->wheel distance edges, actuator->wheel t_s edges, featureless
/// actuator<->actuator edges.
gnn::GraphSchema model_graph_schema();

/// Wheel features per the front/rear feature vectors (offsets relative to
/// the CW Frenet position, speed, heading with previous steering on the
/// front wheels); actuator features are the current commands.
gnn::HeteroGraph build_model_graph(const EgoState& x_k, double delta_k, double throttle_k,
                                   double delta_prev, const track::ReferencePath& path,
                                   const plant::PlantParams& params, double t_s);

struct GvmConfig {
    gnn::G2oConfig g2o;                       // M_m = g2o.out_dim
    std::vector<int> mlp_hidden = {64, 32};   // MLP_m hidden widths
    double update_threshold = 0.0;            // epsilon; 0 = always learn
    double t_s = 0.1;
};

/// Graph Vehicle Model: Gamma = MLP_m(flatten(G2O_m(G_m))) scales the
/// bicycle derivative elementwise; explicit Euler produces the prediction.
class GvmNet {
public:
    GvmNet() = default;
    GvmNet(GvmConfig cfg, Rng& rng);

    struct Prediction {
        ad::Var xhat;   ///< 4x1
        ad::Var gamma;  ///< 4x1
    };

    /// Build the prediction chain on `t`. Gradients flow to `delta_k` and,
    /// when `trainable`, into the net parameters.
    Prediction predict_on_tape(ad::Tape& t, const EgoState& x_k, ad::Var delta_k, double throttle_k,
                               double delta_prev, const track::ReferencePath& path,
                               const plant::PlantParams& params, bool trainable) const;

    /// Value-only convenience on a fresh tape.
    EgoState predict_next(const EgoState& x_k, double delta_k, double throttle_k, double delta_prev,
                          const track::ReferencePath& path, const plant::PlantParams& params) const;

    /// Test hook: pin Gamma to a fixed vector (e.g. ones) instead of the nets.
    void set_gamma_override(std::optional<Vec4> gamma) { gamma_override_ = gamma; }

    std::vector<ad::Parameter*> params();
    const GvmConfig& config() const { return cfg_; }
    int health_faults() const { return health_faults_; }

    void save(const std::string& path) const;
    void load(const std::string& path);

private:
    GvmConfig cfg_;
    gnn::G2oNet g2o_;
    ad::Mlp mlp_;
    std::optional<Vec4> gamma_override_;
    mutable int health_faults_ = 0;
};

/// One online update from the observed next state: mean SmoothL1 over the
/// 4-component error (heading wrapped), backward, Adam step. Returns the
/// loss; updates are gated by cfg.update_threshold and skipped on
/// non-finite losses.
double gvm_update(ad::Tape& t, const GvmNet::Prediction& pred, const EgoState& observed_next,
                  ad::Adam& opt, double threshold = 0.0);

/// Deterministic excitation inputs: steering sweeps, chirps, throttle steps
/// with a small seeded dither; a velocity governor keeps v inside the
/// operating envelope.
std::vector<ControlInput> excitation_schedule(int steps, std::uint64_t seed);

struct PretrainResult {
    std::vector<double> epoch_loss;
    int steps_per_epoch = 0;
};

/// Streaming pre-training on the plant over the replayed excitation
/// schedule (one-step predict -> observe -> update per step).
PretrainResult pretrain_gvm(GvmNet& net, ad::Adam& opt, const plant::PlantParams& params,
                            const track::ReferencePath& path, const std::vector<ControlInput>& schedule,
                            int epochs);

}  // namespace latlab::gvm
