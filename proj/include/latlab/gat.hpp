#pragma once

#include <vector>

#include "latlab/graph.hpp"
#include "latlab/nn.hpp"

namespace latlab::gnn {

struct G2oConfig {
    int layers = 2;
    int heads = 2;
    int hidden = 32;    ///< width of non-final layers (heads concatenated)
    int out_dim = 16;   ///< M, output feature dim
    bool concat_last = false;  ///< concatenate heads at the final layer instead of averaging
    double leaky_slope = 0.2;
};

/// Per-node output embeddings, [type][node], each out_dim x 1.
using NodeVars = std::vector<std::vector<ad::Var>>;

/// Attention coefficients of one layer: per edge set, a heads x n_edges matrix.
using AttentionCoefficients = std::vector<Mat>;

/// Stack of (heterogeneous GAT + parallel dense-over-flattened-features)
/// layers combined by add then ReLU.
class G2oNet {
public:
    G2oNet() = default;
    G2oNet(GraphSchema schema, G2oConfig cfg, Rng& rng);

    /// Lift a plain graph's node features onto the tape as constants.
    NodeVars lift(ad::Tape& t, const HeteroGraph& g) const;

    /// Forward through all layers. `features` must be on `t` and match the
    /// schema; topology and edge features are read from `g`.
    /// When `attention_out` is non-null it receives per-layer coefficients.
    NodeVars forward(ad::Tape& t, const HeteroGraph& g, const NodeVars& features, bool trainable,
                     std::vector<AttentionCoefficients>* attention_out = nullptr) const;

    /// Coefficients of one layer on the given graph (fresh tape, values only).
    AttentionCoefficients attention_coefficients(int layer, const HeteroGraph& g) const;

    const GraphSchema& schema() const { return schema_; }
    const G2oConfig& config() const { return cfg_; }
    int out_dim() const { return cfg_.out_dim; }

    std::vector<ad::Parameter*> params();
    /// Test hook: zero the edge-feature projections so edge features become inert.
    void zero_edge_projections();

private:
    struct LayerParams {
        // per node type, per head: head_dim x in_dim projection
        std::vector<std::vector<ad::Parameter>> w_node;
        // per edge type, per head: attention vector (2*head_dim + e_dim ? head_dim : 0) x 1
        std::vector<std::vector<ad::Parameter>> attn;
        // per edge type, per head: head_dim x feature_dim (only when featured)
        std::vector<std::vector<ad::Parameter>> w_edge;
        ad::Parameter w_lin;  // (N * out_width) x (N_flat_in)
        ad::Parameter b_lin;  // (N * out_width) x 1
        int in_width_homogeneous = 0;  // 0 on layer 1 (per-type dims)
        int head_dim = 0;
        int out_width = 0;
        bool concat = true;
    };

    void check_graph(const HeteroGraph& g) const;
    NodeVars layer_forward(ad::Tape& t, LayerParams& lp, const HeteroGraph& g,
                           const NodeVars& in, bool trainable, AttentionCoefficients* attn_out) const;

    GraphSchema schema_;
    G2oConfig cfg_;
    mutable std::vector<LayerParams> layers_;
};

}  // namespace latlab::gnn
