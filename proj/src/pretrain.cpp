#include "gfmate/pretrain.hpp"

#include "gfmate/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

namespace gfmate {

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::uint64_t pair_key(NodeId u, NodeId v) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
           static_cast<std::uint32_t>(v);
}

struct AdamState {
    std::vector<Matrix> m_w, v_w;
    std::vector<RowVector> m_b, v_b;
    Index t = 0;

    explicit AdamState(const GcnParams& p) {
        for (Index l = 0; l < p.num_layers(); ++l) {
            m_w.push_back(Matrix::Zero(p.weights[l].rows(), p.weights[l].cols()));
            v_w.push_back(m_w.back());
            m_b.push_back(RowVector::Zero(p.biases[l].size()));
            v_b.push_back(m_b.back());
        }
    }

    template <typename P, typename G>
    static void update(P& param, const G& grad, P& m, P& v, const PretrainConfig& cfg,
                       double c1, double c2) {
        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
        v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * grad.cwiseProduct(grad);
        param.array() -= cfg.learning_rate * (m.array() / c1) /
                         ((v.array() / c2).sqrt() + cfg.adam_eps);
    }

    void step(GcnParams& p, const GcnParams& g, const PretrainConfig& cfg) {
        ++t;
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
        for (Index l = 0; l < p.num_layers(); ++l) {
            update(p.weights[l], g.weights[l], m_w[l], v_w[l], cfg, c1, c2);
            update(p.biases[l], g.biases[l], m_b[l], v_b[l], cfg, c1, c2);
        }
    }
};

// One source graph prepared for training: held-out edges removed from the
// propagation graph and kept aside for validation.
struct PreparedGraph {
    const Graph* full = nullptr;
    CsrMatrix adjacency;
    std::vector<Edge> train_pos;
    std::vector<Edge> val_pos;
    std::vector<Edge> val_neg;
};

}  // namespace

void PretrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw DataError("pretrain: learning_rate must be >= 0");
    if (epochs < 0) throw DataError("pretrain: epochs must be >= 0");
    if (neg_ratio < 1) throw DataError("pretrain: neg_ratio must be >= 1");
    if (hidden_dim < 1 || num_layers < 1) throw DataError("pretrain: hidden_dim and num_layers must be >= 1");
    if (!(edge_holdout_fraction >= 0.0 && edge_holdout_fraction < 1.0)) {
        throw DataError("pretrain: edge_holdout_fraction must lie in [0, 1)");
    }
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw DataError("pretrain: Adam betas must lie in [0, 1)");
    }
}

std::vector<Edge> sample_negative_edges(const Graph& g, Index count, std::uint64_t seed) {
    if (count < 0) throw DataError("sample_negative_edges: negative count");
    const Index n = g.num_nodes;
    const Index available = n * (n - 1) - g.num_directed_edges();
    if (count > available) {
        throw DataError("sample_negative_edges: requested " + std::to_string(count) +
                        " negatives but only " + std::to_string(std::max<Index>(available, 0)) +
                        " non-edges exist");
    }
    Rng rng(seed);
    std::vector<Edge> out;
    out.reserve(static_cast<std::size_t>(count));
    std::unordered_set<std::uint64_t> seen;
    const Index budget = 100 * count + 1000;
    for (Index attempt = 0; static_cast<Index>(out.size()) < count; ++attempt) {
        if (attempt >= budget) {
            throw DataError("sample_negative_edges: graph too dense to sample " +
                            std::to_string(count) + " negatives");
        }
        const auto u = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n)));
        const auto v = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n)));
        if (u == v || g.has_edge(u, v)) continue;
        if (!seen.insert(pair_key(u, v)).second) continue;
        out.emplace_back(u, v);
    }
    return out;
}

std::vector<double> edge_scores(const Matrix& final_layer, std::span<const Edge> pairs) {
    std::vector<double> s;
    s.reserve(pairs.size());
    for (auto [u, v] : pairs) s.push_back(final_layer.row(u).dot(final_layer.row(v)));
    return s;
}

double auc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
    if (pos_scores.empty() || neg_scores.empty()) throw DataError("auc: empty score set");
    // Mann-Whitney U through midranks of the pooled scores.
    struct Item {
        double score;
        bool positive;
    };
    std::vector<Item> items;
    items.reserve(pos_scores.size() + neg_scores.size());
    for (double s : pos_scores) items.push_back({s, true});
    for (double s : neg_scores) items.push_back({s, false});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        while (j < items.size() && items[j].score == items[i].score) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (items[k].positive) rank_sum += midrank;
        }
        i = j;
    }
    const double np = static_cast<double>(pos_scores.size());
    const double nn = static_cast<double>(neg_scores.size());
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

LpResult lp_loss_and_grads(const GcnParams& params, const CsrMatrix& adjacency,
                           const Matrix& input, std::span<const Edge> pos,
                           std::span<const Edge> neg) {
    if (pos.empty()) throw DataError("lp_loss_and_grads: no positive pairs");
    const Index num_layers = params.num_layers();
    const double slope = params.activation_slope;

    // Forward, keeping the propagated inputs and pre-activations.
    std::vector<Matrix> propagated(static_cast<std::size_t>(num_layers));
    std::vector<Matrix> pre(static_cast<std::size_t>(num_layers));
    Matrix h = input;
    for (Index l = 0; l < num_layers; ++l) {
        propagated[l] = spmm(adjacency, h);
        pre[l] = propagated[l] * params.weights[l];
        pre[l].rowwise() += params.biases[l];
        h = pre[l].unaryExpr([slope](double v) { return leaky_relu(v, slope); });
    }

    // Loss and its gradient w.r.t. the final layer.
    LpResult out;
    out.grads = GcnParams::zeros(params.dims(), slope);
    Matrix dh = Matrix::Zero(h.rows(), h.cols());
    auto accumulate = [&](std::span<const Edge> pairs, bool positive) {
        if (pairs.empty()) return;
        const double scale = 1.0 / static_cast<double>(pairs.size());
        double total = 0.0;
        for (auto [u, v] : pairs) {
            const double s = h.row(u).dot(h.row(v));
            total += positive ? softplus(-s) : softplus(s);
            const double ds = scale * (positive ? logistic(s) - 1.0 : logistic(s));
            dh.row(u) += ds * h.row(v);
            dh.row(v) += ds * h.row(u);
        }
        out.loss += total * scale;
    };
    accumulate(pos, true);
    accumulate(neg, false);
    if (!std::isfinite(out.loss)) throw NumericalError("lp_loss_and_grads: non-finite loss");

    // Backward through leaky(Ahat H W + b); Ahat is symmetric.
    for (Index l = num_layers - 1; l >= 0; --l) {
        Matrix dz = dh.cwiseProduct(pre[l].unaryExpr([slope](double v) { return v >= 0.0 ? 1.0 : slope; }));
        out.grads.weights[l].noalias() = propagated[l].transpose() * dz;
        out.grads.biases[l] = dz.colwise().sum();
        if (l > 0) dh = spmm(adjacency, dz * params.weights[l].transpose());
    }
    return out;
}

LpResult lp_loss_and_grads(const GcnParams& params, const Graph& g, const AlignedFeatures& aligned,
                           std::span<const Edge> pos, std::span<const Edge> neg) {
    return lp_loss_and_grads(params, normalize_adjacency(g), aligned.matrix, pos, neg);
}

GcnParams init_params(const std::vector<Index>& dims, double slope, std::uint64_t seed) {
    GcnParams p = GcnParams::zeros(dims, slope);
    Rng rng(seed);
    for (Index l = 0; l < p.num_layers(); ++l) {
        Matrix& w = p.weights[l];
        const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (Index r = 0; r < w.rows(); ++r) {
            for (Index c = 0; c < w.cols(); ++c) w(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
        }
    }
    return p;
}

PretrainResult pretrain(std::span<const Graph> graphs, const PretrainConfig& cfg) {
    cfg.validate();
    if (graphs.empty()) throw DataError("pretrain: no source graphs");
    const Index input_dim = graphs.front().feature_dim();
    for (const auto& g : graphs) {
        if (g.feature_dim() != input_dim) {
            throw DataError("pretrain: source graphs have different feature dimensions; align them first");
        }
    }

    std::vector<Index> dims{input_dim};
    for (Index l = 0; l < cfg.num_layers; ++l) dims.push_back(cfg.hidden_dim);

    PretrainResult result;
    result.params = init_params(dims, cfg.activation_slope, derive_seed(cfg.seed, 1));
    result.initial = result.params;

    std::vector<PreparedGraph> prepared;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const Graph& g = graphs[gi];
        PreparedGraph pg;
        pg.full = &g;
        auto edges = g.undirected_edges();
        Rng rng(derive_seed(cfg.seed, 100 + gi));
        rng.shuffle(edges);
        const auto n_hold = static_cast<std::size_t>(
            std::floor(cfg.edge_holdout_fraction * static_cast<double>(edges.size())));
        pg.val_pos.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_hold));
        pg.train_pos.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_hold), edges.end());
        if (pg.train_pos.empty()) {
            throw DataError("pretrain: source graph " + std::to_string(gi) + " has no training edges");
        }
        Graph train_graph = build_graph(g.num_nodes, pg.train_pos, Matrix(g.features), g.labels, g.num_classes);
        pg.adjacency = normalize_adjacency(train_graph);
        // Without a holdout, validation falls back to training edges.
        if (pg.val_pos.empty()) pg.val_pos = pg.train_pos;
        pg.val_neg = sample_negative_edges(g, static_cast<Index>(pg.val_pos.size()),
                                           derive_seed(cfg.seed, 200 + gi));
        prepared.push_back(std::move(pg));
    }

    auto mean_auc = [&](const GcnParams& p) {
        double total = 0.0;
        for (const auto& pg : prepared) {
            auto emb = encode(pg.adjacency, pg.full->features, p);
            const Matrix& z = emb.layers.back();
            auto ps = edge_scores(z, pg.val_pos);
            auto ns = edge_scores(z, pg.val_neg);
            total += auc(ps, ns);
        }
        return total / static_cast<double>(prepared.size());
    };

    GcnParams current = result.params;
    result.best_auc = mean_auc(current);
    result.epoch_auc.push_back(result.best_auc);
    AdamState adam(current);

    for (Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (std::size_t gi = 0; gi < prepared.size(); ++gi) {
            const auto& pg = prepared[gi];
            const auto neg = sample_negative_edges(
                *pg.full, cfg.neg_ratio * static_cast<Index>(pg.train_pos.size()),
                derive_seed(cfg.seed, 1000003ULL * static_cast<std::uint64_t>(epoch) + gi));
            auto lp = lp_loss_and_grads(current, pg.adjacency, pg.full->features, pg.train_pos, neg);
            epoch_loss += lp.loss;
            adam.step(current, lp.grads, cfg);
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(prepared.size()));
        const double a = mean_auc(current);
        result.epoch_auc.push_back(a);
        if (a > result.best_auc) {
            result.best_auc = a;
            result.best_epoch = epoch;
            result.params = current;
        }
    }
    return result;
}

}  // namespace gfmate
