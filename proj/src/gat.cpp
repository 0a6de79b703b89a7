#include "latlab/gat.hpp"

#include <stdexcept>

namespace latlab::gnn {

using ad::Tape;
using ad::Var;

G2oNet::G2oNet(GraphSchema schema, G2oConfig cfg, Rng& rng) : schema_(std::move(schema)), cfg_(cfg) {
    if (cfg_.layers < 1) throw std::invalid_argument("g2o: needs at least one layer");
    if (cfg_.hidden % cfg_.heads != 0)
        throw std::invalid_argument("g2o: hidden width must be divisible by head count");
    if (cfg_.concat_last && cfg_.out_dim % cfg_.heads != 0)
        throw std::invalid_argument("g2o: out_dim must be divisible by head count when concatenating");

    int total_nodes = schema_.total_nodes();
    for (int l = 0; l < cfg_.layers; ++l) {
        LayerParams lp;
        bool final_layer = (l == cfg_.layers - 1);
        lp.concat = !final_layer || cfg_.concat_last;
        lp.head_dim = final_layer ? (cfg_.concat_last ? cfg_.out_dim / cfg_.heads : cfg_.out_dim)
                                  : cfg_.hidden / cfg_.heads;
        lp.out_width = final_layer ? cfg_.out_dim : cfg_.hidden;
        lp.in_width_homogeneous = (l == 0) ? 0 : layers_.back().out_width;

        auto in_dim = [&](int type_idx) {
            return l == 0 ? schema_.node_types[type_idx].feature_dim : lp.in_width_homogeneous;
        };

        int flat_in = 0;
        for (std::size_t t = 0; t < schema_.node_types.size(); ++t)
            flat_in += schema_.node_types[t].count * in_dim(static_cast<int>(t));

        for (std::size_t t = 0; t < schema_.node_types.size(); ++t) {
            std::vector<ad::Parameter> heads;
            for (int h = 0; h < cfg_.heads; ++h)
                heads.emplace_back(ad::glorot(lp.head_dim, in_dim(static_cast<int>(t)), rng));
            lp.w_node.push_back(std::move(heads));
        }
        for (const auto& et : schema_.edge_types) {
            std::vector<ad::Parameter> attn_heads, we_heads;
            int score_dim = 2 * lp.head_dim + (et.feature_dim > 0 ? lp.head_dim : 0);
            for (int h = 0; h < cfg_.heads; ++h) {
                attn_heads.emplace_back(ad::glorot(1, score_dim, rng));
                if (et.feature_dim > 0) we_heads.emplace_back(ad::glorot(lp.head_dim, et.feature_dim, rng));
            }
            lp.attn.push_back(std::move(attn_heads));
            lp.w_edge.push_back(std::move(we_heads));
        }
        lp.w_lin = ad::Parameter(ad::glorot(total_nodes * lp.out_width, flat_in, rng));
        lp.b_lin = ad::Parameter(Mat::Zero(total_nodes * lp.out_width, 1));
        layers_.push_back(std::move(lp));
    }
}

void G2oNet::check_graph(const HeteroGraph& g) const {
    g.validate();
    if (!g.schema.same_structure(schema_))
        throw std::invalid_argument("g2o: graph schema does not match the network schema");
}

NodeVars G2oNet::lift(Tape& t, const HeteroGraph& g) const {
    check_graph(g);
    NodeVars out(g.schema.node_types.size());
    for (std::size_t ti = 0; ti < g.schema.node_types.size(); ++ti) {
        const Mat& f = g.node_features[ti];
        for (long i = 0; i < f.cols(); ++i) out[ti].push_back(t.constant(Mat(f.col(i))));
    }
    return out;
}

NodeVars G2oNet::layer_forward(Tape& t, LayerParams& lp, const HeteroGraph& g, const NodeVars& in,
                               bool trainable, AttentionCoefficients* attn_out) const {
    const auto& schema = schema_;
    int heads = cfg_.heads;

    // per-head projections of every node
    std::vector<NodeVars> proj(heads);
    std::vector<std::vector<Var>> w(heads);
    for (int h = 0; h < heads; ++h) {
        proj[h].resize(schema.node_types.size());
        for (std::size_t ti = 0; ti < schema.node_types.size(); ++ti) {
            Var wv = ad::lift(t, lp.w_node[ti][h], trainable);
            for (const Var& f : in[ti]) proj[h][ti].push_back(matmul(wv, f));
        }
    }

    // raw attention scores grouped by destination node
    struct Incoming {
        Var score;
        Var message;
        int edge_set;
        int edge_idx;
    };
    // [head][type][node] -> incoming list
    std::vector<std::vector<std::vector<std::vector<Incoming>>>> buckets(heads);
    for (int h = 0; h < heads; ++h) {
        buckets[h].resize(schema.node_types.size());
        for (std::size_t ti = 0; ti < schema.node_types.size(); ++ti)
            buckets[h][ti].resize(schema.node_types[ti].count);
    }

    if (attn_out) {
        attn_out->clear();
        for (const auto& es : g.edge_sets) attn_out->push_back(Mat::Zero(heads, static_cast<long>(es.edges.size())));
    }

    for (std::size_t ei = 0; ei < schema.edge_types.size(); ++ei) {
        const auto& spec = schema.edge_types[ei];
        const auto& es = g.edge_sets[ei];
        int st = schema.node_type_index(spec.src);
        int dt = schema.node_type_index(spec.dst);
        for (int h = 0; h < heads; ++h) {
            Var a = ad::lift(t, lp.attn[ei][h], trainable);
            Var we;
            if (spec.feature_dim > 0) we = ad::lift(t, lp.w_edge[ei][h], trainable);
            for (std::size_t k = 0; k < es.edges.size(); ++k) {
                const Edge& e = es.edges[k];
                Var wh_p = proj[h][dt][e.dst];
                Var wh_q = proj[h][st][e.src];
                Var cat;
                if (spec.feature_dim > 0) {
                    Var z = t.constant(Mat(es.features.col(static_cast<long>(k))));
                    std::array<Var, 3> parts = {wh_p, wh_q, matmul(we, z)};
                    cat = vcat(parts);
                } else {
                    std::array<Var, 2> parts = {wh_p, wh_q};
                    cat = vcat(parts);
                }
                Var score = leaky_relu(matmul(a, cat), cfg_.leaky_slope);
                buckets[h][dt][e.dst].push_back(
                    {score, wh_q, static_cast<int>(ei), static_cast<int>(k)});
            }
        }
    }

    // dense branch over node-major flattened input features
    std::vector<Var> flat_parts;
    for (std::size_t ti = 0; ti < schema.node_types.size(); ++ti)
        for (const Var& f : in[ti]) flat_parts.push_back(f);
    Var flat_in = vcat(flat_parts);
    Var lin = matmul(ad::lift(t, lp.w_lin, trainable), flat_in) + ad::lift(t, lp.b_lin, trainable);

    NodeVars out(schema.node_types.size());
    for (std::size_t ti = 0; ti < schema.node_types.size(); ++ti) {
        for (int i = 0; i < schema.node_types[ti].count; ++i) {
            std::vector<Var> head_outs;
            for (int h = 0; h < heads; ++h) {
                const auto& inc = buckets[h][ti][i];
                Var agg;
                if (inc.empty()) {
                    // no in-neighbours: the GAT branch contributes zero
                    agg = t.constant(Mat::Zero(lp.head_dim, 1));
                } else {
                    std::vector<Var> scores;
                    scores.reserve(inc.size());
                    for (const auto& m : inc) scores.push_back(m.score);
                    Var alpha = softmax(vcat(scores));
                    if (attn_out) {
                        const Mat& av = t.val(alpha);
                        for (std::size_t j = 0; j < inc.size(); ++j)
                            (*attn_out)[inc[j].edge_set](h, inc[j].edge_idx) = av(static_cast<long>(j), 0);
                    }
                    for (std::size_t j = 0; j < inc.size(); ++j) {
                        Var term = smul(block(alpha, static_cast<int>(j), 0, 1, 1), inc[j].message);
                        agg = (j == 0) ? term : agg + term;
                    }
                }
                head_outs.push_back(agg);
            }
            Var gat;
            if (lp.concat) {
                gat = vcat(head_outs);
            } else {
                gat = head_outs[0];
                for (std::size_t h = 1; h < head_outs.size(); ++h) gat = gat + head_outs[h];
                gat = scale(gat, 1.0 / static_cast<double>(heads));
            }
            int offset = (schema.node_offset(static_cast<int>(ti)) + i) * lp.out_width;
            Var lin_slice = block(lin, offset, 0, lp.out_width, 1);
            out[ti].push_back(relu(gat + lin_slice));
        }
    }
    return out;
}

NodeVars G2oNet::forward(Tape& t, const HeteroGraph& g, const NodeVars& features, bool trainable,
                         std::vector<AttentionCoefficients>* attention_out) const {
    check_graph(g);
    if (attention_out) attention_out->resize(layers_.size());
    NodeVars z = features;
    for (std::size_t l = 0; l < layers_.size(); ++l)
        z = layer_forward(t, layers_[l], g, z, trainable, attention_out ? &(*attention_out)[l] : nullptr);
    return z;
}

AttentionCoefficients G2oNet::attention_coefficients(int layer, const HeteroGraph& g) const {
    if (layer < 0 || layer >= static_cast<int>(layers_.size()))
        throw std::invalid_argument("g2o: layer index out of range");
    Tape t;
    std::vector<AttentionCoefficients> all;
    forward(t, g, lift(t, g), false, &all);
    return all[static_cast<std::size_t>(layer)];
}

std::vector<ad::Parameter*> G2oNet::params() {
    std::vector<ad::Parameter*> out;
    for (auto& lp : layers_) {
        for (auto& tv : lp.w_node)
            for (auto& p : tv) out.push_back(&p);
        for (auto& ev : lp.attn)
            for (auto& p : ev) out.push_back(&p);
        for (auto& ev : lp.w_edge)
            for (auto& p : ev) out.push_back(&p);
        out.push_back(&lp.w_lin);
        out.push_back(&lp.b_lin);
    }
    return out;
}

void G2oNet::zero_edge_projections() {
    for (auto& lp : layers_)
        for (auto& ev : lp.w_edge)
            for (auto& p : ev) p.value.setZero();
}

}  // namespace latlab::gnn
