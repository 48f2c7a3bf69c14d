#pragma once

#include "gfmate/common.hpp"

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace gfmate {

using Edge = std::pair<NodeId, NodeId>;

/// Undirected attributed graph in CSR form.
///
/// Invariants (checked by validate()):
///   - row_offsets is non-decreasing, starts at 0, ends at col_indices.size()
///   - column indices within a row are strictly increasing
///   - adjacency is symmetric and has no stored self-loops
///   - features has num_nodes rows
///   - every label is kUnlabeled or in [0, num_classes)
struct Graph {
    Index num_nodes = 0;
    std::vector<Index> row_offsets{0};
    std::vector<NodeId> col_indices;
    Matrix features;
    std::vector<Label> labels;
    Index num_classes = 0;

    Index feature_dim() const { return features.cols(); }
    Index num_directed_edges() const { return static_cast<Index>(col_indices.size()); }
    Index degree(NodeId u) const { return row_offsets[u + 1] - row_offsets[u]; }

    std::span<const NodeId> neighbors(NodeId u) const {
        return {col_indices.data() + row_offsets[u], static_cast<std::size_t>(degree(u))};
    }

    bool has_edge(NodeId u, NodeId v) const;

    /// Each undirected edge once, as (u, v) with u < v, in CSR order.
    std::vector<Edge> undirected_edges() const;

    /// Throws DataError on any invariant violation.
    void validate() const;

    friend bool operator==(const Graph& a, const Graph& b);
};

/// Builds a valid Graph from an arbitrary edge list: symmetrizes, drops
/// self-loops and duplicates. Throws DataError on out-of-range node ids,
/// a feature row count mismatch or an out-of-range label.
Graph build_graph(Index num_nodes, std::span<const Edge> edges, Matrix features,
                  std::vector<Label> labels, Index num_classes);

/// Reads meta.txt, edges.tsv, features.tsv and labels.tsv from `dir`.
Graph load_graph(const std::filesystem::path& dir);

/// Writes the four dataset files. edges.tsv carries both directions.
void save_graph(const Graph& g, const std::filesystem::path& dir);

struct FewShotSplit {
    Index shots_per_class = 0;
    std::vector<LabeledNode> fs_nodes;
    std::vector<NodeId> val_nodes;
    std::vector<NodeId> test_nodes;

    friend bool operator==(const FewShotSplit&, const FewShotSplit&) = default;
};

/// Samples `shots` labelled items per class, then splits the shuffled
/// remainder into validation (floor(remaining / 10)) and test (the rest).
/// Works on any label vector so graph-level tasks can share it.
FewShotSplit make_split(std::span<const Label> labels, Index num_classes, Index shots,
                        std::uint64_t seed);
FewShotSplit make_split(const Graph& g, Index shots, std::uint64_t seed);

/// split.tsv: `node_id<TAB>role` with role in {fs, val, test}. fs labels come
/// from `labels` on load.
void save_split(const FewShotSplit& split, const std::filesystem::path& file);
FewShotSplit load_split(const std::filesystem::path& file, std::span<const Label> labels);

struct SbmParams {
    std::vector<Index> block_sizes;
    double p_in = 0.0;
    double p_out = 0.0;
    Index feature_dim = 8;
    double feature_shift = 1.0;
    std::uint64_t seed = 0;
};

/// Stochastic block model. Features are standard normal plus `feature_shift`
/// along axis (block mod feature_dim); labels are block ids.
Graph generate_sbm(const SbmParams& params);

/// Drops each undirected edge touching an unprotected node with probability
/// `edge_drop_rate`, then permutes feature rows among a random
/// `feature_shuffle_rate` fraction of the unprotected nodes.
Graph perturb_graph(const Graph& g, double edge_drop_rate, double feature_shuffle_rate,
                    std::span<const NodeId> protected_nodes, std::uint64_t seed);

}  // namespace gfmate
