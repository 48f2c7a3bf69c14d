#include "gfmate/graph.hpp"

#include "gfmate/rng.hpp"
#include "gfmate/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gfmate {

namespace fs = std::filesystem;

bool Graph::has_edge(NodeId u, NodeId v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<Edge> Graph::undirected_edges() const {
    std::vector<Edge> out;
    out.reserve(col_indices.size() / 2);
    for (NodeId u = 0; u < num_nodes; ++u) {
        for (NodeId v : neighbors(u)) {
            if (u < v) out.emplace_back(u, v);
        }
    }
    return out;
}

void Graph::validate() const {
    if (num_nodes < 0) throw DataError("graph: negative node count");
    if (static_cast<Index>(row_offsets.size()) != num_nodes + 1 || row_offsets.front() != 0) {
        throw DataError("graph: row_offsets must have num_nodes+1 entries starting at 0");
    }
    if (row_offsets.back() != num_directed_edges()) {
        throw DataError("graph: row_offsets[N] != number of column indices");
    }
    for (NodeId u = 0; u < num_nodes; ++u) {
        if (row_offsets[u + 1] < row_offsets[u]) throw DataError("graph: row_offsets decreasing");
        auto nb = neighbors(u);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            NodeId v = nb[k];
            if (v < 0 || v >= num_nodes) throw DataError("graph: column index out of range");
            if (v == u) throw DataError("graph: stored self-loop at node " + std::to_string(u));
            if (k > 0 && nb[k - 1] >= v) throw DataError("graph: row not strictly increasing");
        }
    }
    for (NodeId u = 0; u < num_nodes; ++u) {
        for (NodeId v : neighbors(u)) {
            if (!has_edge(v, u)) throw DataError("graph: adjacency not symmetric");
        }
    }
    if (features.rows() != num_nodes) throw DataError("graph: feature row count != num_nodes");
    if (static_cast<Index>(labels.size()) != num_nodes) {
        throw DataError("graph: label count != num_nodes");
    }
    for (Label y : labels) {
        if (y != kUnlabeled && (y < 0 || y >= num_classes)) {
            throw DataError("graph: label " + std::to_string(y) + " out of range");
        }
    }
}

bool operator==(const Graph& a, const Graph& b) {
    return a.num_nodes == b.num_nodes && a.row_offsets == b.row_offsets &&
           a.col_indices == b.col_indices && a.features.rows() == b.features.rows() &&
           a.features.cols() == b.features.cols() && a.features == b.features &&
           a.labels == b.labels && a.num_classes == b.num_classes;
}

Graph build_graph(Index num_nodes, std::span<const Edge> edges, Matrix features,
                  std::vector<Label> labels, Index num_classes) {
    std::vector<Edge> directed;
    directed.reserve(edges.size() * 2);
    for (auto [u, v] : edges) {
        if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes) {
            throw DataError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                            ") out of range for " + std::to_string(num_nodes) + " nodes");
        }
        if (u == v) continue;
        directed.emplace_back(u, v);
        directed.emplace_back(v, u);
    }
    std::sort(directed.begin(), directed.end());
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

    Graph g;
    g.num_nodes = num_nodes;
    g.row_offsets.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
    g.col_indices.reserve(directed.size());
    for (auto [u, v] : directed) {
        ++g.row_offsets[u + 1];
        g.col_indices.push_back(v);
    }
    for (Index i = 0; i < num_nodes; ++i) g.row_offsets[i + 1] += g.row_offsets[i];
    g.features = std::move(features);
    g.labels = std::move(labels);
    g.num_classes = num_classes;
    g.validate();
    return g;
}

Graph load_graph(const fs::path& dir) {
    auto meta = text::parse_key_values(text::read_lines(dir / "meta.txt"), "meta.txt");
    auto need = [&](const char* key) -> long long {
        auto it = meta.find(key);
        if (it == meta.end()) throw DataError(std::string("meta.txt: missing ") + key);
        return text::parse_int(it->second, std::string("meta.txt ") + key);
    };
    const Index n = need("num_nodes");
    const Index c = need("num_classes");
    const Index d = need("feature_dim");
    if (n < 0 || c < 0 || d < 0) throw DataError("meta.txt: negative dimension");

    std::vector<Edge> edges;
    const auto edge_lines = text::read_lines(dir / "edges.tsv");
    for (std::size_t i = 0; i < edge_lines.size(); ++i) {
        auto fields = text::split_ws(edge_lines[i]);
        if (fields.empty()) continue;
        const std::string ctx = "edges.tsv:" + std::to_string(i + 1);
        if (fields.size() != 2) throw DataError(ctx + ": expected two node ids");
        edges.emplace_back(static_cast<NodeId>(text::parse_int(fields[0], ctx)),
                           static_cast<NodeId>(text::parse_int(fields[1], ctx)));
    }

    Matrix features(n, d);
    Index row = 0;
    const auto feat_lines = text::read_lines(dir / "features.tsv");
    for (std::size_t i = 0; i < feat_lines.size(); ++i) {
        auto fields = text::split_ws(feat_lines[i]);
        if (fields.empty() && d > 0) continue;
        const std::string ctx = "features.tsv:" + std::to_string(i + 1);
        if (fields.empty() && d == 0) {
            // A zero-width feature matrix has nothing to read.
            continue;
        }
        if (row >= n) throw DataError(ctx + ": more feature rows than num_nodes");
        if (static_cast<Index>(fields.size()) != d) {
            throw DataError(ctx + ": expected " + std::to_string(d) + " values, got " +
                            std::to_string(fields.size()));
        }
        for (Index j = 0; j < d; ++j) features(row, j) = text::parse_double(fields[j], ctx);
        ++row;
    }
    if (d > 0 && row != n) {
        throw DataError("features.tsv: expected " + std::to_string(n) + " rows, got " +
                        std::to_string(row));
    }

    std::vector<Label> labels;
    const auto label_lines = text::read_lines(dir / "labels.tsv");
    for (std::size_t i = 0; i < label_lines.size(); ++i) {
        auto f = text::trim(label_lines[i]);
        if (f.empty()) continue;
        const std::string ctx = "labels.tsv:" + std::to_string(i + 1);
        auto y = text::parse_int(f, ctx);
        if (y != kUnlabeled && (y < 0 || y >= c)) {
            throw DataError(ctx + ": label " + std::to_string(y) + " out of range [0, " +
                            std::to_string(c) + ")");
        }
        labels.push_back(static_cast<Label>(y));
    }
    if (static_cast<Index>(labels.size()) != n) {
        throw DataError("labels.tsv: expected " + std::to_string(n) + " labels, got " +
                        std::to_string(labels.size()));
    }
    return build_graph(n, edges, std::move(features), std::move(labels), c);
}

void save_graph(const Graph& g, const fs::path& dir) {
    fs::create_directories(dir);
    text::write_file(dir / "meta.txt", "num_nodes=" + std::to_string(g.num_nodes) +
                                           "\nnum_classes=" + std::to_string(g.num_classes) +
                                           "\nfeature_dim=" + std::to_string(g.feature_dim()) +
                                           "\n");
    std::string edges;
    for (NodeId u = 0; u < g.num_nodes; ++u) {
        for (NodeId v : g.neighbors(u)) {
            edges += std::to_string(u);
            edges += '\t';
            edges += std::to_string(v);
            edges += '\n';
        }
    }
    text::write_file(dir / "edges.tsv", edges);
    std::string feats;
    for (Index i = 0; i < g.num_nodes; ++i) {
        feats += text::format_row(g.features.row(i).data(), g.feature_dim());
        feats += '\n';
    }
    text::write_file(dir / "features.tsv", feats);
    std::string labels;
    for (Label y : g.labels) labels += std::to_string(y) + "\n";
    text::write_file(dir / "labels.tsv", labels);
}

FewShotSplit make_split(std::span<const Label> labels, Index num_classes, Index shots,
                        std::uint64_t seed) {
    if (shots < 1) throw DataError("make_split: shots per class must be >= 1");
    std::vector<std::vector<NodeId>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != kUnlabeled) by_class[labels[i]].push_back(static_cast<NodeId>(i));
    }
    Rng rng(seed);
    FewShotSplit split;
    split.shots_per_class = shots;
    std::vector<char> taken(labels.size(), 0);
    for (Index c = 0; c < num_classes; ++c) {
        auto& members = by_class[c];
        if (static_cast<Index>(members.size()) < shots) {
            throw DataError("make_split: class " + std::to_string(c) + " has " +
                            std::to_string(members.size()) + " labelled nodes, need " +
                            std::to_string(shots));
        }
        rng.shuffle(members);
        for (Index k = 0; k < shots; ++k) {
            split.fs_nodes.push_back({members[k], static_cast<Label>(c)});
            taken[members[k]] = 1;
        }
    }
    std::vector<NodeId> rest;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != kUnlabeled && !taken[i]) rest.push_back(static_cast<NodeId>(i));
    }
    if (rest.size() < 10) {
        throw DataError("make_split: only " + std::to_string(rest.size()) +
                        " labelled nodes remain after few-shot sampling, need >= 10");
    }
    rng.shuffle(rest);
    const std::size_t n_val = rest.size() / 10;
    split.val_nodes.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.test_nodes.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
    return split;
}

FewShotSplit make_split(const Graph& g, Index shots, std::uint64_t seed) {
    return make_split(g.labels, g.num_classes, shots, seed);
}

void save_split(const FewShotSplit& split, const fs::path& file) {
    std::string out;
    for (const auto& ln : split.fs_nodes) out += std::to_string(ln.node) + "\tfs\n";
    for (NodeId v : split.val_nodes) out += std::to_string(v) + "\tval\n";
    for (NodeId v : split.test_nodes) out += std::to_string(v) + "\ttest\n";
    text::write_file(file, out);
}

FewShotSplit load_split(const fs::path& file, std::span<const Label> labels) {
    FewShotSplit split;
    const auto lines = text::read_lines(file);
    std::vector<char> seen(labels.size(), 0);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto fields = text::split_ws(lines[i]);
        if (fields.empty()) continue;
        const std::string ctx = file.filename().string() + ":" + std::to_string(i + 1);
        if (fields.size() != 2) throw DataError(ctx + ": expected node_id<TAB>role");
        auto id = text::parse_int(fields[0], ctx);
        if (id < 0 || id >= static_cast<long long>(labels.size())) {
            throw DataError(ctx + ": node id out of range");
        }
        if (seen[id]) throw DataError(ctx + ": node listed twice");
        seen[id] = 1;
        const auto node = static_cast<NodeId>(id);
        if (fields[1] == "fs") {
            if (labels[node] == kUnlabeled) throw DataError(ctx + ": few-shot node is unlabeled");
            split.fs_nodes.push_back({node, labels[node]});
        } else if (fields[1] == "val") {
            split.val_nodes.push_back(node);
        } else if (fields[1] == "test") {
            split.test_nodes.push_back(node);
        } else {
            throw DataError(ctx + ": unknown role '" + std::string(fields[1]) + "'");
        }
    }
    if (!split.fs_nodes.empty()) {
        std::vector<Index> counts;
        for (const auto& ln : split.fs_nodes) {
            if (ln.label >= static_cast<Label>(counts.size())) counts.resize(ln.label + 1, 0);
            ++counts[ln.label];
        }
        split.shots_per_class = *std::min_element(counts.begin(), counts.end());
    }
    return split;
}

Graph generate_sbm(const SbmParams& params) {
    if (params.block_sizes.empty()) throw DataError("generate_sbm: no blocks");
    auto valid_p = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!valid_p(params.p_in) || !valid_p(params.p_out)) {
        throw DataError("generate_sbm: probabilities must lie in [0, 1]");
    }
    if (params.feature_dim < 1) throw DataError("generate_sbm: feature_dim must be >= 1");

    Index n = 0;
    std::vector<Label> labels;
    for (std::size_t b = 0; b < params.block_sizes.size(); ++b) {
        if (params.block_sizes[b] < 0) throw DataError("generate_sbm: negative block size");
        n += params.block_sizes[b];
        labels.insert(labels.end(), static_cast<std::size_t>(params.block_sizes[b]),
                      static_cast<Label>(b));
    }

    Rng rng(params.seed);
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u) {
        for (NodeId v = u + 1; v < n; ++v) {
            const double p = labels[u] == labels[v] ? params.p_in : params.p_out;
            if (rng.bernoulli(p)) edges.emplace_back(u, v);
        }
    }
    Matrix features(n, params.feature_dim);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < params.feature_dim; ++j) features(i, j) = rng.normal();
        features(i, labels[i] % params.feature_dim) += params.feature_shift;
    }
    return build_graph(n, edges, std::move(features), std::move(labels),
                       static_cast<Index>(params.block_sizes.size()));
}

Graph perturb_graph(const Graph& g, double edge_drop_rate, double feature_shuffle_rate,
                    std::span<const NodeId> protected_nodes, std::uint64_t seed) {
    auto valid = [](double r) { return r >= 0.0 && r <= 1.0; };
    if (!valid(edge_drop_rate) || !valid(feature_shuffle_rate)) {
        throw DataError("perturb_graph: rates must lie in [0, 1]");
    }
    std::vector<char> is_protected(static_cast<std::size_t>(g.num_nodes), 0);
    for (NodeId v : protected_nodes) {
        if (v < 0 || v >= g.num_nodes) throw DataError("perturb_graph: protected id out of range");
        is_protected[v] = 1;
    }

    Rng rng(seed);
    std::vector<Edge> kept;
    for (auto [u, v] : g.undirected_edges()) {
        const bool exposed = !is_protected[u] || !is_protected[v];
        if (exposed && rng.bernoulli(edge_drop_rate)) continue;
        kept.emplace_back(u, v);
    }

    Matrix features = g.features;
    std::vector<NodeId> candidates;
    for (NodeId v = 0; v < g.num_nodes; ++v) {
        if (!is_protected[v]) candidates.push_back(v);
    }
    const auto k = static_cast<std::size_t>(
        std::llround(feature_shuffle_rate * static_cast<double>(candidates.size())));
    if (k > 1) {
        rng.shuffle(candidates);
        std::vector<NodeId> chosen(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k));
        std::vector<NodeId> sources = chosen;
        rng.shuffle(sources);
        for (std::size_t i = 0; i < k; ++i) features.row(chosen[i]) = g.features.row(sources[i]);
    }
    return build_graph(g.num_nodes, kept, std::move(features), g.labels, g.num_classes);
}

}  // namespace gfmate
