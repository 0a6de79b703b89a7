#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "latlab/autodiff.hpp"
#include "latlab/rng.hpp"

namespace latlab::ad {

/// Scalar forms of the paper-exact activations/losses.
inline double hard_tanh(double w) { return std::clamp(2.0 * w, -1.0, 1.0); }
inline double smooth_l1(double e) { return std::abs(e) < 1.0 ? 0.5 * e * e : std::abs(e) - 0.5; }

/// Insert a parameter on the tape, trainable or frozen.
inline Var lift(Tape& t, Parameter& p, bool trainable) {
    return trainable ? t.param(p) : t.constant(p.value);
}

/// Fully connected net: ReLU on hidden layers, identity output.
/// `head_scale` shrinks the final layer's weight init (keeps downstream
/// saturating activations inside their linear band at the start);
/// `head_bias` sets the final bias entries (e.g. 1 for gain-like outputs).
class Mlp {
public:
    Mlp() = default;
    /// widths = {in, hidden..., out}
    Mlp(std::vector<int> widths, Rng& rng, double head_scale = 1.0, double head_bias = 0.0);

    Var forward(Tape& t, Var z0, bool trainable) const;

    const std::vector<int>& widths() const { return widths_; }
    std::vector<Parameter*> params();
    std::size_t param_count() const;

private:
    std::vector<int> widths_;
    // mutable so forward() can lift into tapes from a const net; values are
    // only changed by the optimizer.
    mutable std::vector<Parameter> weights_;
    mutable std::vector<Parameter> biases_;
};

/// Adam with bias correction over a registry of parameters.
class Adam {
public:
    struct Config {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double clip_norm = 0.0;  ///< global gradient-norm cap; 0 disables
        bool plain_sgd = false;  ///< skip moment normalization (w -= lr * g)
    };

    Adam() = default;
    explicit Adam(Config cfg) : cfg_(cfg) {}

    void attach(std::vector<Parameter*> params);
    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }

    /// One update from the accumulated grads; grads zeroed afterward.
    /// A non-finite gradient anywhere skips the whole update.
    void step();

    int skipped_updates() const { return skipped_; }
    std::int64_t step_count() const { return t_; }

private:
    Config cfg_;
    std::vector<Parameter*> params_;
    std::vector<Mat> m_, v_;
    std::int64_t t_ = 0;
    int skipped_ = 0;
};

/// Glorot-uniform matrix.
Mat glorot(int rows, int cols, Rng& rng);

// Flat binary checkpoint: magic, tensor count, per-tensor shape + row-major
// float64 payload. Loaders verify shapes against the receiving parameters.
void save_params(std::ostream& os, const std::vector<Parameter*>& params);
void load_params(std::istream& is, const std::vector<Parameter*>& params);
void save_params_file(const std::string& path, const std::vector<Parameter*>& params);
void load_params_file(const std::string& path, const std::vector<Parameter*>& params);

}  // namespace latlab::ad
