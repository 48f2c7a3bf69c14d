#pragma once

#include "gfmate/common.hpp"
#include "gfmate/gcn.hpp"
#include "gfmate/graph.hpp"

#include <span>
#include <vector>

namespace gfmate {

struct PretrainConfig {
    double learning_rate = 1e-3;
    Index epochs = 200;
    Index neg_ratio = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    Index hidden_dim = 64;
    Index num_layers = 2;
    double edge_holdout_fraction = 0.1;
    double activation_slope = 0.25;

    /// Throws DataError if a field is out of range.
    void validate() const;
};

/// Uniformly samples `count` distinct ordered pairs (u, v), u != v, that are
/// not edges of `g`. Throws DataError if the graph has too few non-edges or
/// the retry budget runs out.
std::vector<Edge> sample_negative_edges(const Graph& g, Index count, std::uint64_t seed);

struct LpResult {
    double loss = 0.0;
    GcnParams grads;  // same shapes as the parameters
};

/// Mean BCE over positive pairs plus mean BCE over negative pairs, scored by
/// the logistic of final-layer dot products, with exact gradients.
LpResult lp_loss_and_grads(const GcnParams& params, const CsrMatrix& adjacency,
                           const Matrix& input, std::span<const Edge> pos,
                           std::span<const Edge> neg);
LpResult lp_loss_and_grads(const GcnParams& params, const Graph& g, const AlignedFeatures& aligned,
                           std::span<const Edge> pos, std::span<const Edge> neg);

/// Final-layer dot products z_u . z_v for each pair.
std::vector<double> edge_scores(const Matrix& final_layer, std::span<const Edge> pairs);

/// Probability that a random positive outscores a random negative, ties
/// counted as one half.
double auc(std::span<const double> pos_scores, std::span<const double> neg_scores);

/// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
GcnParams init_params(const std::vector<Index>& dims, double slope, std::uint64_t seed);

struct PretrainResult {
    GcnParams params;           // snapshot with the best held-out AUC
    GcnParams initial;
    std::vector<double> epoch_loss;  // mean training loss per epoch, before its update
    std::vector<double> epoch_auc;   // held-out AUC after each epoch; [0] is the init
    Index best_epoch = 0;
    double best_auc = 0.0;
};

/// Link-prediction pre-training. Every graph's `features` must already be
/// aligned to the same width, which becomes the model input dimension.
PretrainResult pretrain(std::span<const Graph> graphs, const PretrainConfig& cfg);

}  // namespace gfmate
