#pragma once

#include <string>
#include <vector>

#include "latlab/types.hpp"

namespace latlab::gnn {

struct NodeTypeSpec {
    std::string name;
    int count = 0;
    int feature_dim = 0;
};

/// Directed edge type; feature_dim 0 means featureless edges.
struct EdgeTypeSpec {
    std::string name;
    std::string src;
    std::string dst;
    int feature_dim = 0;
};

struct GraphSchema {
    std::vector<NodeTypeSpec> node_types;
    std::vector<EdgeTypeSpec> edge_types;

    int node_type_index(const std::string& name) const;
    int total_nodes() const;
    int flat_feature_dim() const;
    /// Offset of (type, node) in the node-major flattened feature vector.
    int node_offset(int type_index) const;
    bool same_structure(const GraphSchema& other) const;
};

struct Edge {
    int src = 0;  ///< node index within the source type
    int dst = 0;  ///< node index within the destination type
};

/// Typed nodes + typed directed edges with per-type feature arrays.
/// Node features are stored one column per node (dim x count).
struct HeteroGraph {
    struct EdgeSet {
        std::vector<Edge> edges;
        Mat features;  ///< feature_dim x n_edges; 0 x n when featureless
    };

    GraphSchema schema;
    std::vector<Mat> node_features;  ///< parallel to schema.node_types
    std::vector<EdgeSet> edge_sets;  ///< parallel to schema.edge_types

    /// Throws naming the offending node/edge type on any shape or index error.
    void validate() const;
};

}  // namespace latlab::gnn
