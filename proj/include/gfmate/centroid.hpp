#pragma once

#include "gfmate/common.hpp"
#include "gfmate/gcn.hpp"
#include "gfmate/graph.hpp"

#include <span>
#include <vector>

namespace gfmate {

constexpr double kCosineEps = 1e-12;

/// a.b / (max(|a|, eps) max(|b|, eps)), clamped to [-1, 1].
double cosine_sim(const Eigen::Ref<const RowVector>& a, const Eigen::Ref<const RowVector>& b);

/// Cosine similarity of each listed row of `emb` against every row of
/// `centroids`: |nodes| x C.
Matrix similarity_matrix(const Matrix& emb, const Matrix& centroids, std::span<const NodeId> nodes);

/// Per-layer class prototypes, C x d_l each.
struct Centroids {
    std::vector<Matrix> layers;

    Index num_classes() const { return layers.empty() ? 0 : layers.front().rows(); }
    Index depth() const { return static_cast<Index>(layers.size()) - 1; }
};

/// Class means of the few-shot rows at every layer.
Centroids init_centroids(const LayerEmbeddings& emb, std::span<const LabeledNode> fs_nodes,
                         Index num_classes);

/// Row-wise softmax; each row is shifted by its maximum first.
Matrix softmax_rows(const Matrix& logits);

/// -sum p log p with 0 log 0 = 0.
double entropy(const Eigen::Ref<const RowVector>& p);

struct EntropyReport {
    std::vector<NodeId> nodes;        // the test nodes, in input order
    std::vector<Matrix> probs;        // per layer: |nodes| x C
    std::vector<Vector> entropies;    // per layer: length |nodes|
    Vector mean_entropy;              // per layer
    Index pivot_layer = 0;            // lowest mean entropy, lowest index on ties
    std::vector<Label> layerwise_preds;  // argmax of pivot-layer probs
};

/// Softmax over plain cosine similarities (no temperature) at every layer.
EntropyReport entropy_report(const LayerEmbeddings& emb, const Centroids& cents,
                             std::span<const NodeId> test_nodes);

struct AugmentedSplit {
    std::vector<LabeledNode> aug_nodes;    // pseudo-labelled test nodes
    std::vector<LabeledNode> combined_fs;  // original few-shot nodes followed by aug_nodes
    Index n_aug = 0;
};

/// For every class, the `n_aug` test nodes predicted as that class with the
/// smallest pivot-layer entropy (node id breaks ties).
AugmentedSplit augment(const EntropyReport& report, std::span<const LabeledNode> fs_nodes,
                       Index n_aug);

/// Least-similar class at `pivot` for every test node (lowest class on ties).
std::vector<LabeledNode> complementary_labels(const LayerEmbeddings& emb, const Centroids& cents,
                                              Index pivot, std::span<const NodeId> test_nodes);

}  // namespace gfmate
