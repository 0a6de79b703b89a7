#include "latlab/graph.hpp"

#include <stdexcept>

namespace latlab::gnn {

int GraphSchema::node_type_index(const std::string& name) const {
    for (std::size_t i = 0; i < node_types.size(); ++i)
        if (node_types[i].name == name) return static_cast<int>(i);
    throw std::invalid_argument("schema: unknown node type '" + name + "'");
}

int GraphSchema::total_nodes() const {
    int n = 0;
    for (const auto& t : node_types) n += t.count;
    return n;
}

int GraphSchema::flat_feature_dim() const {
    int n = 0;
    for (const auto& t : node_types) n += t.count * t.feature_dim;
    return n;
}

int GraphSchema::node_offset(int type_index) const {
    int n = 0;
    for (int i = 0; i < type_index; ++i) n += node_types[i].count;
    return n;
}

bool GraphSchema::same_structure(const GraphSchema& other) const {
    if (node_types.size() != other.node_types.size() || edge_types.size() != other.edge_types.size())
        return false;
    for (std::size_t i = 0; i < node_types.size(); ++i) {
        const auto& a = node_types[i];
        const auto& b = other.node_types[i];
        if (a.name != b.name || a.count != b.count || a.feature_dim != b.feature_dim) return false;
    }
    for (std::size_t i = 0; i < edge_types.size(); ++i) {
        const auto& a = edge_types[i];
        const auto& b = other.edge_types[i];
        if (a.name != b.name || a.src != b.src || a.dst != b.dst || a.feature_dim != b.feature_dim)
            return false;
    }
    return true;
}

void HeteroGraph::validate() const {
    if (node_features.size() != schema.node_types.size())
        throw std::invalid_argument("graph: node feature array count != schema node types");
    if (edge_sets.size() != schema.edge_types.size())
        throw std::invalid_argument("graph: edge set count != schema edge types");
    for (std::size_t i = 0; i < schema.node_types.size(); ++i) {
        const auto& spec = schema.node_types[i];
        const Mat& f = node_features[i];
        if (f.rows() != spec.feature_dim || f.cols() != spec.count)
            throw std::invalid_argument("graph: node type '" + spec.name + "' features " +
                                        std::to_string(f.rows()) + "x" + std::to_string(f.cols()) +
                                        " != expected " + std::to_string(spec.feature_dim) + "x" +
                                        std::to_string(spec.count));
    }
    for (std::size_t i = 0; i < schema.edge_types.size(); ++i) {
        const auto& spec = schema.edge_types[i];
        const auto& es = edge_sets[i];
        int nsrc = schema.node_types[schema.node_type_index(spec.src)].count;
        int ndst = schema.node_types[schema.node_type_index(spec.dst)].count;
        for (const Edge& e : es.edges) {
            if (e.src < 0 || e.src >= nsrc || e.dst < 0 || e.dst >= ndst)
                throw std::invalid_argument("graph: edge type '" + spec.name + "' has out-of-range endpoint");
        }
        long want_rows = spec.feature_dim;
        if (es.features.rows() != want_rows ||
            (want_rows > 0 && es.features.cols() != static_cast<long>(es.edges.size())))
            throw std::invalid_argument("graph: edge type '" + spec.name + "' feature shape mismatch");
    }
}

}  // namespace latlab::gnn
