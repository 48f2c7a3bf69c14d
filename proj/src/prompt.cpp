#include "gfmate/prompt.hpp"

#include "gfmate/rng.hpp"
#include "gfmate/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gfmate {

bool operator==(const PromptState& a, const PromptState& b) {
    if (a.beta.size() != b.beta.size() || a.eta.size() != b.eta.size()) return false;
    for (std::size_t l = 0; l < a.beta.size(); ++l) {
        if (a.beta[l].rows() != b.beta[l].rows() || a.beta[l].cols() != b.beta[l].cols() ||
            a.beta[l] != b.beta[l]) {
            return false;
        }
    }
    return a.eta == b.eta;
}

void TuneConfig::validate() const {
    if (!(tau > 0.0)) throw DataError("tune: tau must be > 0");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw DataError("tune: gamma must lie in [0, 1]");
    if (!(alpha >= 0.0)) throw DataError("tune: alpha must be >= 0");
    if (steps < 0) throw DataError("tune: steps must be >= 0");
    if (!(beta_init_std >= 0.0)) throw DataError("tune: beta_init_std must be >= 0");
    if (patience < 0) throw DataError("tune: patience must be >= 0");
}

PromptState init_prompts(const Centroids& cents, const TuneConfig& cfg) {
    Rng rng(cfg.seed);
    PromptState p;
    for (const Matrix& e : cents.layers) {
        Matrix b(e.rows(), e.cols());
        for (Index c = 0; c < b.rows(); ++c) {
            for (Index j = 0; j < b.cols(); ++j) b(c, j) = cfg.beta_init_std * rng.normal();
        }
        p.beta.push_back(std::move(b));
    }
    p.eta = Vector::Ones(static_cast<Index>(cents.layers.size()));
    return p;
}

Centroids prompted_centroids(const Centroids& cents, const PromptState& prompts) {
    if (cents.layers.size() != prompts.beta.size()) throw DataError("prompted_centroids: layer count mismatch");
    Centroids out;
    for (std::size_t l = 0; l < cents.layers.size(); ++l) {
        const Matrix& e = cents.layers[l];
        const Matrix& b = prompts.beta[l];
        if (e.rows() != b.rows() || e.cols() != b.cols()) {
            throw DataError("prompted_centroids: shape mismatch at layer " + std::to_string(l));
        }
        out.layers.push_back(e + b);
    }
    return out;
}

RowVector class_prob(const Eigen::Ref<const RowVector>& h, const Matrix& centroids_layer,
                     double eta, double tau) {
    if (!(tau > 0.0)) throw DataError("class_prob: tau must be > 0");
    Matrix logits(1, centroids_layer.rows());
    for (Index c = 0; c < centroids_layer.rows(); ++c) {
        logits(0, c) = eta * cosine_sim(h, centroids_layer.row(c)) / tau;
    }
    return softmax_rows(logits).row(0);
}

namespace {

// Row-normalized embeddings of one labelled node group, per layer.
struct Group {
    std::vector<Matrix> unit_rows;
    std::vector<Label> labels;
};

Group gather(const LayerEmbeddings& emb, std::span<const LabeledNode> nodes) {
    Group g;
    for (const auto& ln : nodes) {
        if (ln.node < 0 || ln.node >= emb.num_rows()) throw DataError("tgcl: node id out of range");
        g.labels.push_back(ln.label);
    }
    for (const Matrix& h : emb.layers) {
        Matrix u(static_cast<Index>(nodes.size()), h.cols());
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto row = h.row(nodes[i].node);
            u.row(static_cast<Index>(i)) = row / std::max(row.norm(), kCosineEps);
        }
        g.unit_rows.push_back(std::move(u));
    }
    return g;
}

class TgclObjective {
public:
    TgclObjective(const LayerEmbeddings& emb, const TgclTask& task, const Centroids& cents)
        : cents_(cents), few_shot_(gather(emb, task.few_shot)), comp_(gather(emb, task.complementary)) {
        if (task.few_shot.empty()) throw DataError("tgcl: empty few-shot set");
        if (task.complementary.empty()) throw DataError("tgcl: empty complementary-labelled set");
        if (emb.layers.size() != cents.layers.size()) throw DataError("tgcl: layer count mismatch");
        const Index num_classes = cents.num_classes();
        for (Label y : few_shot_.labels) {
            if (y < 0 || y >= num_classes) throw DataError("tgcl: few-shot label out of range");
        }
        for (Label y : comp_.labels) {
            if (y < 0 || y >= num_classes) throw DataError("tgcl: complementary label out of range");
        }
    }

    TgclLoss evaluate(const PromptState& prompts, const TuneConfig& cfg, TgclGrads* grads) const {
        const auto num_layers = static_cast<Index>(cents_.layers.size());
        if (static_cast<Index>(prompts.beta.size()) != num_layers || prompts.eta.size() != num_layers) {
            throw DataError("tgcl: prompt depth does not match centroids");
        }
        if (!(cfg.tau > 0.0)) throw DataError("tgcl: tau must be > 0");
        if (grads) {
            grads->d_beta.clear();
            grads->d_eta = Vector::Zero(num_layers);
        }
        TgclLoss loss;
        const double w_comp = cfg.gamma / static_cast<double>(comp_.labels.size());
        const double w_fs = (1.0 - cfg.gamma) / static_cast<double>(few_shot_.labels.size());

        for (Index l = 0; l < num_layers; ++l) {
            const Matrix& e = cents_.layers[l];
            const Matrix& b = prompts.beta[l];
            if (e.rows() != b.rows() || e.cols() != b.cols()) throw DataError("tgcl: prompt shape mismatch");
            const Matrix et = e + b;
            Vector norms(et.rows());
            for (Index c = 0; c < et.rows(); ++c) norms(c) = et.row(c).norm();
            const double eta = prompts.eta(l);

            Matrix d_et = grads ? Matrix::Zero(et.rows(), et.cols()) : Matrix();
            double d_eta = 0.0;

            auto run = [&](const Group& g, bool complementary, double weight) {
                const Matrix& hn = g.unit_rows[l];
                Matrix s = hn * et.transpose();
                for (Index c = 0; c < et.rows(); ++c) s.col(c) /= std::max(norms(c), kCosineEps);
                s = s.cwiseMax(-1.0).cwiseMin(1.0);
                const Matrix p = softmax_rows(s * (eta / cfg.tau));

                double term = 0.0;
                Matrix dz = grads ? Matrix::Zero(s.rows(), s.cols()) : Matrix();
                for (Index i = 0; i < p.rows(); ++i) {
                    const Label y = g.labels[i];
                    if (complementary) {
                        // 1 - p_y summed over the other classes keeps precision near p_y = 1.
                        double q = 0.0;
                        for (Index c = 0; c < p.cols(); ++c) {
                            if (c != y) q += p(i, c);
                        }
                        term -= std::log(std::max(q, kLogClamp));
                        if (grads && q >= kLogClamp) {
                            dz.row(i) = (-p(i, y) / q) * p.row(i);
                            dz(i, y) = p(i, y);
                        }
                    } else {
                        term -= std::log(std::max(p(i, y), kLogClamp));
                        if (grads && p(i, y) >= kLogClamp) {
                            dz.row(i) = p.row(i);
                            dz(i, y) -= 1.0;
                        }
                    }
                }
                term /= static_cast<double>(p.rows());
                if (complementary) {
                    loss.test_term += term;
                } else {
                    loss.few_shot_term += term;
                }
                if (!grads || weight == 0.0) return;

                dz *= weight;
                d_eta += dz.cwiseProduct(s).sum() / cfg.tau;
                const Matrix ds = dz * (eta / cfg.tau);
                const Matrix proj = ds.transpose() * hn;  // C x d
                for (Index c = 0; c < et.rows(); ++c) {
                    if (norms(c) > kCosineEps) {
                        const double radial = ds.col(c).dot(s.col(c));
                        d_et.row(c) += proj.row(c) / norms(c) - (radial / (norms(c) * norms(c))) * et.row(c);
                    } else {
                        d_et.row(c) += proj.row(c) / kCosineEps;
                    }
                }
            };
            run(comp_, true, w_comp);
            run(few_shot_, false, w_fs);

            if (grads) {
                grads->d_beta.push_back(std::move(d_et));
                grads->d_eta(l) = d_eta;
            }
        }
        loss.total = cfg.gamma * loss.test_term + (1.0 - cfg.gamma) * loss.few_shot_term;
        if (!std::isfinite(loss.total)) throw NumericalError("tgcl: non-finite loss");
        return loss;
    }

private:
    const Centroids& cents_;
    Group few_shot_;
    Group comp_;
};

Index argmax_first(const Eigen::Ref<const RowVector>& v) {
    Index best = 0;
    for (Index c = 1; c < v.size(); ++c) {
        if (v(c) > v(best)) best = c;
    }
    return best;
}

}  // namespace

TgclLoss tgcl_loss(const LayerEmbeddings& emb, const TgclTask& task, const Centroids& cents,
                   const PromptState& prompts, const TuneConfig& cfg) {
    return TgclObjective(emb, task, cents).evaluate(prompts, cfg, nullptr);
}

TgclGrads tgcl_grads(const LayerEmbeddings& emb, const TgclTask& task, const Centroids& cents,
                     const PromptState& prompts, const TuneConfig& cfg) {
    TgclGrads g;
    TgclObjective(emb, task, cents).evaluate(prompts, cfg, &g);
    return g;
}

std::pair<TgclLoss, TgclGrads> tgcl_loss_and_grads(const LayerEmbeddings& emb, const TgclTask& task,
                                                   const Centroids& cents, const PromptState& prompts,
                                                   const TuneConfig& cfg) {
    TgclGrads g;
    TgclLoss loss = TgclObjective(emb, task, cents).evaluate(prompts, cfg, &g);
    return {loss, std::move(g)};
}

Matrix ensemble_logits(const LayerEmbeddings& emb, const Centroids& cents, const PromptState& prompts,
                       std::span<const NodeId> nodes) {
    const Centroids tilde = prompted_centroids(cents, prompts);
    if (emb.layers.size() != tilde.layers.size()) throw DataError("predict: layer count mismatch");
    Matrix logits = Matrix::Zero(static_cast<Index>(nodes.size()), cents.num_classes());
    for (std::size_t l = 0; l < tilde.layers.size(); ++l) {
        logits += prompts.eta(static_cast<Index>(l)) * similarity_matrix(emb.layers[l], tilde.layers[l], nodes);
    }
    return logits;
}

std::vector<Label> predict(const LayerEmbeddings& emb, const Centroids& cents,
                           const PromptState& prompts, std::span<const NodeId> nodes) {
    const Matrix logits = ensemble_logits(emb, cents, prompts, nodes);
    std::vector<Label> out;
    out.reserve(nodes.size());
    for (Index i = 0; i < logits.rows(); ++i) out.push_back(static_cast<Label>(argmax_first(logits.row(i))));
    return out;
}

TuneResult tune(const LayerEmbeddings& emb, const TgclTask& task, const Centroids& cents,
                const TuneConfig& cfg, std::span<const LabeledNode> val_nodes) {
    return tune(emb, task, cents, cfg, val_nodes, init_prompts(cents, cfg));
}

TuneResult tune(const LayerEmbeddings& emb, const TgclTask& task, const Centroids& cents,
                const TuneConfig& cfg, std::span<const LabeledNode> val_nodes, PromptState initial) {
    cfg.validate();
    const TgclObjective objective(emb, task, cents);
    std::vector<NodeId> val_ids;
    for (const auto& ln : val_nodes) val_ids.push_back(ln.node);
    auto val_accuracy = [&](const PromptState& p) {
        if (val_ids.empty()) return 0.0;
        const auto preds = predict(emb, cents, p, val_ids);
        Index hits = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == val_nodes[i].label;
        return static_cast<double>(hits) / static_cast<double>(preds.size());
    };

    TuneResult result;
    PromptState current = std::move(initial);
    Index since_best = 0;
    for (Index step = 0;; ++step) {
        TgclGrads grads;
        const bool last = step == cfg.steps;
        const TgclLoss loss = objective.evaluate(current, cfg, last ? nullptr : &grads);
        result.loss_history.push_back(loss.total);
        const double acc = val_accuracy(current);
        result.val_history.push_back(acc);
        // Ties move the snapshot forward to the more-tuned prompts; only a
        // strict gain resets the patience counter.
        if (step == 0 || acc > result.best_val_accuracy) {
            since_best = 0;
        } else {
            ++since_best;
        }
        if (step == 0 || acc >= result.best_val_accuracy) {
            result.best_val_accuracy = acc;
            result.best_step = step;
            result.prompts = current;
        }
        if (last || (cfg.patience > 0 && since_best >= cfg.patience)) break;
        if (cfg.update_beta) {
            for (std::size_t l = 0; l < current.beta.size(); ++l) current.beta[l] -= cfg.alpha * grads.d_beta[l];
        }
        if (cfg.update_eta) current.eta -= cfg.alpha * grads.d_eta;
    }
    return result;
}

void save_prompts(const PromptState& prompts, const std::filesystem::path& file) {
    std::string out = "layers=" + std::to_string(prompts.depth()) + "\nclasses=" +
                      std::to_string(prompts.beta.empty() ? 0 : prompts.beta.front().rows()) + "\n";
    for (std::size_t l = 0; l < prompts.beta.size(); ++l) {
        out += "beta" + std::to_string(l) + "\n";
        const Matrix& b = prompts.beta[l];
        for (Index c = 0; c < b.rows(); ++c) out += text::format_row(b.row(c).data(), b.cols()) + "\n";
    }
    out += "eta\n" + text::format_row(prompts.eta.data(), prompts.eta.size()) + "\n";
    text::write_file(file, out);
}

PromptState load_prompts(const std::filesystem::path& file) {
    const auto lines = text::read_lines(file);
    const std::string name = file.filename().string();
    std::vector<std::string_view> body;
    for (const auto& line : lines) {
        auto t = text::trim(line);
        if (!t.empty()) body.push_back(t);
    }
    std::size_t pos = 0;
    auto next = [&]() -> std::string_view {
        if (pos >= body.size()) throw DataError(name + ": unexpected end of file");
        return body[pos++];
    };
    auto header = [&](std::string_view key) {
        auto line = next();
        if (line.substr(0, key.size() + 1) != std::string(key) + "=") {
            throw DataError(name + ": expected " + std::string(key) + "=");
        }
        return text::parse_int(line.substr(key.size() + 1), name);
    };
    const auto depth = header("layers");
    const auto classes = header("classes");
    if (depth < 0 || classes < 1) throw DataError(name + ": invalid layers/classes");
    PromptState p;
    for (Index l = 0; l <= depth; ++l) {
        if (next() != "beta" + std::to_string(l)) throw DataError(name + ": expected beta" + std::to_string(l));
        std::vector<std::vector<double>> rows;
        for (Index c = 0; c < classes; ++c) {
            std::vector<double> row;
            for (auto f : text::split_ws(next())) row.push_back(text::parse_double(f, name));
            if (!rows.empty() && row.size() != rows.front().size()) throw DataError(name + ": ragged beta block");
            rows.push_back(std::move(row));
        }
        Matrix b(classes, static_cast<Index>(rows.front().size()));
        for (Index c = 0; c < classes; ++c) {
            for (Index j = 0; j < b.cols(); ++j) b(c, j) = rows[c][j];
        }
        p.beta.push_back(std::move(b));
    }
    if (next() != "eta") throw DataError(name + ": expected eta");
    auto fields = text::split_ws(next());
    if (static_cast<Index>(fields.size()) != depth + 1) throw DataError(name + ": eta must have layers+1 values");
    p.eta.resize(depth + 1);
    for (Index l = 0; l <= depth; ++l) p.eta(l) = text::parse_double(fields[l], name);
    return p;
}

}  // namespace gfmate
