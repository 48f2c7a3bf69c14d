#pragma once

// Finite-difference gradient checks shared by the unit and acceptance suites.

#include "gfmate/pretrain.hpp"
#include "gfmate/prompt.hpp"
#include "test_util.hpp"

#include <vector>

namespace gfmate::oracle {

struct PromptInstance {
    LayerEmbeddings emb;
    Centroids cents;
    TgclTask task;
    PromptState prompts;
};

// Random embeddings for n_te + n_fs nodes over `dims`; the first n_fs nodes
// are few-shot with labels cycling through the classes.
inline PromptInstance random_prompt_instance(Rng& rng, Index n_te, Index n_fs, Index classes,
                                             const std::vector<Index>& dims) {
    PromptInstance in;
    const Index n = n_te + n_fs;
    for (Index d : dims) in.emb.layers.push_back(random_matrix(rng, n, d));
    for (Index i = 0; i < n_fs; ++i) in.task.few_shot.push_back({static_cast<NodeId>(i), static_cast<Label>(i % classes)});
    for (Index i = n_fs; i < n; ++i) {
        in.task.complementary.push_back({static_cast<NodeId>(i), static_cast<Label>(rng.below(classes))});
    }
    for (Index d : dims) in.cents.layers.push_back(random_matrix(rng, classes, d));
    for (Index d : dims) in.prompts.beta.push_back(random_matrix(rng, classes, d, 0.3));
    in.prompts.eta = Vector(static_cast<Index>(dims.size()));
    for (Index l = 0; l < in.prompts.eta.size(); ++l) in.prompts.eta(l) = 0.5 + rng.uniform() * 2.0;
    return in;
}

/// Worst relative error of tgcl_grads against central differences.
inline double max_tgcl_grad_error(PromptInstance& in, const TuneConfig& cfg, double step = 1e-6) {
    const TgclGrads g = tgcl_grads(in.emb, in.task, in.cents, in.prompts, cfg);
    auto f = [&] { return tgcl_loss(in.emb, in.task, in.cents, in.prompts, cfg).total; };
    double worst = 0;
    for (std::size_t l = 0; l < in.prompts.beta.size(); ++l) {
        for (Index k = 0; k < in.prompts.beta[l].size(); ++k) {
            const double fd = central_difference(f, in.prompts.beta[l].data() + k, step);
            worst = std::max(worst, relative_error(g.d_beta[l].data()[k], fd));
        }
    }
    for (Index l = 0; l < in.prompts.eta.size(); ++l) {
        const double fd = central_difference(f, in.prompts.eta.data() + l, step);
        worst = std::max(worst, relative_error(g.d_eta(l), fd));
    }
    return worst;
}

/// Worst relative error of lp_loss_and_grads against central differences.
inline double max_lp_grad_error(const GcnParams& params, const CsrMatrix& adj, const Matrix& x,
                                const std::vector<Edge>& pos, const std::vector<Edge>& neg) {
    const LpResult analytic = lp_loss_and_grads(params, adj, x, pos, neg);
    GcnParams probe = params;
    auto loss = [&] { return lp_loss_and_grads(probe, adj, x, pos, neg).loss; };
    double worst = 0.0;
    for (Index l = 0; l < params.num_layers(); ++l) {
        for (Index i = 0; i < probe.weights[l].size(); ++i) {
            const double fd = central_difference(loss, probe.weights[l].data() + i);
            worst = std::max(worst, relative_error(analytic.grads.weights[l].data()[i], fd));
        }
        for (Index i = 0; i < probe.biases[l].size(); ++i) {
            const double fd = central_difference(loss, probe.biases[l].data() + i);
            worst = std::max(worst, relative_error(analytic.grads.biases[l].data()[i], fd));
        }
    }
    return worst;
}

}  // namespace gfmate::oracle
