#pragma once

#include "gfmate/centroid.hpp"
#include "gfmate/common.hpp"
#include "gfmate/gcn.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace gfmate {

/// Centroid prompts (one C x d_l matrix per layer) and layer prompts (one
/// scalar per layer, layers 0..L).
struct PromptState {
    std::vector<Matrix> beta;
    Vector eta;

    Index depth() const { return static_cast<Index>(beta.size()) - 1; }
};

bool operator==(const PromptState& a, const PromptState& b);

struct TuneConfig {
    double tau = 1.0;
    double gamma = 0.5;
    double alpha = 1e-2;
    Index steps = 200;
    double beta_init_std = 0.01;
    Index patience = 50;  // 0 disables early stopping
    std::uint64_t seed = 0;
    bool update_beta = true;
    bool update_eta = true;

    void validate() const;
};

/// beta ~ N(0, beta_init_std^2) drawn layer by layer, class by class; eta = 1.
PromptState init_prompts(const Centroids& cents, const TuneConfig& cfg);

/// e + beta per layer and class.
Centroids prompted_centroids(const Centroids& cents, const PromptState& prompts);

/// softmax_c(eta * cos(h, e_c) / tau).
RowVector class_prob(const Eigen::Ref<const RowVector>& h, const Matrix& centroids_layer,
                     double eta, double tau);

/// Labelled node sets seen by the objective: the (augmented) few-shot nodes
/// with their labels and the test nodes with their complementary labels.
/// True test labels never enter here.
struct TgclTask {
    std::vector<LabeledNode> few_shot;
    std::vector<LabeledNode> complementary;
};

struct TgclLoss {
    double total = 0.0;
    double test_term = 0.0;      // -sum_l mean log(1 - p_comp)
    double few_shot_term = 0.0;  // -sum_l mean log p_label
};

struct TgclGrads {
    std::vector<Matrix> d_beta;
    Vector d_eta;
};

constexpr double kLogClamp = 1e-12;

TgclLoss tgcl_loss(const LayerEmbeddings& emb, const TgclTask& task, const Centroids& cents,
                   const PromptState& prompts, const TuneConfig& cfg);

TgclGrads tgcl_grads(const LayerEmbeddings& emb, const TgclTask& task, const Centroids& cents,
                     const PromptState& prompts, const TuneConfig& cfg);

/// Loss and gradients in one pass.
std::pair<TgclLoss, TgclGrads> tgcl_loss_and_grads(const LayerEmbeddings& emb, const TgclTask& task,
                                                   const Centroids& cents, const PromptState& prompts,
                                                   const TuneConfig& cfg);

/// Ensemble scores sum_l eta_l cos(h_i^l, e~_c^l): |nodes| x C.
Matrix ensemble_logits(const LayerEmbeddings& emb, const Centroids& cents, const PromptState& prompts,
                       std::span<const NodeId> nodes);

/// Argmax of ensemble_logits (lowest class on ties).
std::vector<Label> predict(const LayerEmbeddings& emb, const Centroids& cents,
                           const PromptState& prompts, std::span<const NodeId> nodes);

struct TuneResult {
    PromptState prompts;               // best validation snapshot
    Index best_step = 0;
    double best_val_accuracy = 0.0;
    std::vector<double> loss_history;  // total loss at step 0, 1, ... (prompts after k updates)
    std::vector<double> val_history;   // validation accuracy at the same steps
};

/// Plain gradient descent on the prompts, keeping the snapshot with the best
/// validation accuracy (the latest one on ties); stops after `patience` steps
/// without strict improvement.
TuneResult tune(const LayerEmbeddings& emb, const TgclTask& task, const Centroids& cents,
                const TuneConfig& cfg, std::span<const LabeledNode> val_nodes);

/// Same, starting from given prompts.
TuneResult tune(const LayerEmbeddings& emb, const TgclTask& task, const Centroids& cents,
                const TuneConfig& cfg, std::span<const LabeledNode> val_nodes, PromptState initial);

void save_prompts(const PromptState& prompts, const std::filesystem::path& file);
PromptState load_prompts(const std::filesystem::path& file);

}  // namespace gfmate
