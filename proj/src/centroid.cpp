#include "gfmate/centroid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gfmate {

double cosine_sim(const Eigen::Ref<const RowVector>& a, const Eigen::Ref<const RowVector>& b) {
    if (a.size() != b.size()) throw DataError("cosine_sim: length mismatch");
    const double na = std::max(a.norm(), kCosineEps);
    const double nb = std::max(b.norm(), kCosineEps);
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

Matrix similarity_matrix(const Matrix& emb, const Matrix& centroids, std::span<const NodeId> nodes) {
    if (emb.cols() != centroids.cols()) throw DataError("similarity_matrix: dimension mismatch");
    Matrix sims(static_cast<Index>(nodes.size()), centroids.rows());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (Index c = 0; c < centroids.rows(); ++c) {
            sims(static_cast<Index>(i), c) = cosine_sim(emb.row(nodes[i]), centroids.row(c));
        }
    }
    return sims;
}

Centroids init_centroids(const LayerEmbeddings& emb, std::span<const LabeledNode> fs_nodes,
                         Index num_classes) {
    std::vector<Index> counts(static_cast<std::size_t>(num_classes), 0);
    for (const auto& ln : fs_nodes) {
        if (ln.label < 0 || ln.label >= num_classes) throw DataError("init_centroids: label out of range");
        if (ln.node < 0 || ln.node >= emb.num_rows()) throw DataError("init_centroids: node out of range");
        ++counts[ln.label];
    }
    for (Index c = 0; c < num_classes; ++c) {
        if (counts[c] == 0) throw DataError("init_centroids: class " + std::to_string(c) + " has no few-shot nodes");
    }
    Centroids cents;
    for (const Matrix& h : emb.layers) {
        Matrix e = Matrix::Zero(num_classes, h.cols());
        for (const auto& ln : fs_nodes) e.row(ln.label) += h.row(ln.node);
        for (Index c = 0; c < num_classes; ++c) e.row(c) /= static_cast<double>(counts[c]);
        cents.layers.push_back(std::move(e));
    }
    return cents;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        double total = 0.0;
        for (Index c = 0; c < logits.cols(); ++c) {
            p(i, c) = std::exp(logits(i, c) - mx);
            total += p(i, c);
        }
        p.row(i) /= total;
    }
    return p;
}

double entropy(const Eigen::Ref<const RowVector>& p) {
    double h = 0.0;
    for (Index c = 0; c < p.size(); ++c) {
        if (p(c) > 0.0) h -= p(c) * std::log(p(c));
    }
    return h;
}

namespace {

Index argmax_first(const Eigen::Ref<const RowVector>& v) {
    Index best = 0;
    for (Index c = 1; c < v.size(); ++c) {
        if (v(c) > v(best)) best = c;
    }
    return best;
}

Index argmin_first(const Eigen::Ref<const RowVector>& v) {
    Index best = 0;
    for (Index c = 1; c < v.size(); ++c) {
        if (v(c) < v(best)) best = c;
    }
    return best;
}

}  // namespace

EntropyReport entropy_report(const LayerEmbeddings& emb, const Centroids& cents,
                             std::span<const NodeId> test_nodes) {
    if (test_nodes.empty()) throw DataError("entropy_report: empty test set");
    if (emb.layers.size() != cents.layers.size()) throw DataError("entropy_report: layer count mismatch");
    EntropyReport r;
    r.nodes.assign(test_nodes.begin(), test_nodes.end());
    const Index num_layers = static_cast<Index>(emb.layers.size());
    r.mean_entropy = Vector::Zero(num_layers);
    for (Index l = 0; l < num_layers; ++l) {
        Matrix p = softmax_rows(similarity_matrix(emb.layers[l], cents.layers[l], test_nodes));
        Vector h(p.rows());
        for (Index i = 0; i < p.rows(); ++i) h(i) = entropy(p.row(i));
        r.mean_entropy(l) = h.mean();
        r.probs.push_back(std::move(p));
        r.entropies.push_back(std::move(h));
    }
    r.pivot_layer = 0;
    for (Index l = 1; l < num_layers; ++l) {
        if (r.mean_entropy(l) < r.mean_entropy(r.pivot_layer)) r.pivot_layer = l;
    }
    const Matrix& pivot_probs = r.probs[r.pivot_layer];
    r.layerwise_preds.reserve(test_nodes.size());
    for (Index i = 0; i < pivot_probs.rows(); ++i) {
        r.layerwise_preds.push_back(static_cast<Label>(argmax_first(pivot_probs.row(i))));
    }
    return r;
}

AugmentedSplit augment(const EntropyReport& report, std::span<const LabeledNode> fs_nodes,
                       Index n_aug) {
    if (n_aug < 0) throw DataError("augment: n_aug must be >= 0");
    AugmentedSplit out;
    out.n_aug = n_aug;
    out.combined_fs.assign(fs_nodes.begin(), fs_nodes.end());
    if (n_aug == 0 || report.nodes.empty()) return out;

    const Index num_classes = report.probs.front().cols();
    const Vector& h = report.entropies[report.pivot_layer];
    std::vector<NodeId> fs_ids;
    for (const auto& ln : fs_nodes) fs_ids.push_back(ln.node);
    std::sort(fs_ids.begin(), fs_ids.end());

    std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < report.nodes.size(); ++i) {
        if (std::binary_search(fs_ids.begin(), fs_ids.end(), report.nodes[i])) continue;
        by_class[report.layerwise_preds[i]].push_back(static_cast<Index>(i));
    }
    for (Index c = 0; c < num_classes; ++c) {
        auto& idx = by_class[c];
        std::sort(idx.begin(), idx.end(), [&](Index a, Index b) {
            if (h(a) != h(b)) return h(a) < h(b);
            return report.nodes[a] < report.nodes[b];
        });
        const auto take = std::min<std::size_t>(static_cast<std::size_t>(n_aug), idx.size());
        for (std::size_t k = 0; k < take; ++k) {
            out.aug_nodes.push_back({report.nodes[idx[k]], static_cast<Label>(c)});
        }
    }
    out.combined_fs.insert(out.combined_fs.end(), out.aug_nodes.begin(), out.aug_nodes.end());
    return out;
}

std::vector<LabeledNode> complementary_labels(const LayerEmbeddings& emb, const Centroids& cents,
                                              Index pivot, std::span<const NodeId> test_nodes) {
    if (pivot < 0 || pivot >= static_cast<Index>(emb.layers.size()) ||
        pivot >= static_cast<Index>(cents.layers.size())) {
        throw DataError("complementary_labels: pivot layer out of range");
    }
    const Matrix sims = similarity_matrix(emb.layers[pivot], cents.layers[pivot], test_nodes);
    std::vector<LabeledNode> out;
    out.reserve(test_nodes.size());
    for (std::size_t i = 0; i < test_nodes.size(); ++i) {
        out.push_back({test_nodes[i], static_cast<Label>(argmin_first(sims.row(static_cast<Index>(i))))});
    }
    return out;
}

}  // namespace gfmate
