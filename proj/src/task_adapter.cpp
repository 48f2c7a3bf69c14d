#include "gfmate/task_adapter.hpp"

#include "gfmate/text_io.hpp"

#include <string>

namespace gfmate {

namespace fs = std::filesystem;

ViewMode parse_view_mode(std::string_view s) {
    if (s == "raw" || s == "raw-node") return ViewMode::RawNode;
    if (s == "subgraph" || s == "subgraph-mean") return ViewMode::SubgraphMean;
    if (s == "graph" || s == "graph-mean") return ViewMode::GraphMean;
    throw DataError("unknown view mode '" + std::string(s) + "'");
}

std::string_view to_string(ViewMode m) {
    switch (m) {
        case ViewMode::RawNode: return "raw-node";
        case ViewMode::SubgraphMean: return "subgraph-mean";
        case ViewMode::GraphMean: return "graph-mean";
    }
    return "?";
}

EmbeddingView subgraph_view(const Graph& g, const LayerEmbeddings& emb, Index hops) {
    if (hops < 0) throw DataError("subgraph_view: hops must be >= 0");
    if (emb.num_rows() != g.num_nodes) throw DataError("subgraph_view: embedding rows != node count");
    EmbeddingView view;
    view.mode = ViewMode::SubgraphMean;
    view.hops = hops;
    if (hops == 0) {
        view.emb = emb;
        return view;
    }
    for (const Matrix& h : emb.layers) view.emb.layers.push_back(Matrix::Zero(h.rows(), h.cols()));

    // Stamp-based BFS so each source costs only the size of its neighbourhood.
    std::vector<Index> stamp(static_cast<std::size_t>(g.num_nodes), -1);
    std::vector<NodeId> frontier, next, members;
    for (NodeId src = 0; src < g.num_nodes; ++src) {
        members.assign(1, src);
        frontier.assign(1, src);
        stamp[src] = src;
        for (Index depth = 0; depth < hops && !frontier.empty(); ++depth) {
            next.clear();
            for (NodeId u : frontier) {
                for (NodeId v : g.neighbors(u)) {
                    if (stamp[v] == src) continue;
                    stamp[v] = src;
                    next.push_back(v);
                    members.push_back(v);
                }
            }
            frontier.swap(next);
        }
        const double inv = 1.0 / static_cast<double>(members.size());
        for (std::size_t l = 0; l < emb.layers.size(); ++l) {
            auto row = view.emb.layers[l].row(src);
            for (NodeId v : members) row += emb.layers[l].row(v);
            row *= inv;
        }
    }
    return view;
}

EmbeddingView graph_view(std::span<const Graph> graphs, std::span<const LayerEmbeddings> embs) {
    if (graphs.size() != embs.size()) throw DataError("graph_view: graph and embedding lists differ in length");
    EmbeddingView view;
    view.mode = ViewMode::GraphMean;
    if (embs.empty()) return view;
    const std::size_t num_layers = embs.front().layers.size();
    for (std::size_t l = 0; l < num_layers; ++l) {
        view.emb.layers.push_back(Matrix(static_cast<Index>(embs.size()), embs.front().layers[l].cols()));
    }
    for (std::size_t k = 0; k < embs.size(); ++k) {
        if (graphs[k].num_nodes == 0 || embs[k].num_rows() == 0) {
            throw DataError("graph_view: graph " + std::to_string(k) + " is empty");
        }
        if (embs[k].layers.size() != num_layers) throw DataError("graph_view: layer count mismatch");
        for (std::size_t l = 0; l < num_layers; ++l) {
            view.emb.layers[l].row(static_cast<Index>(k)) = embs[k].layers[l].colwise().mean();
        }
    }
    return view;
}

bool is_graph_dataset(const fs::path& dir) { return fs::exists(dir / "graphs.tsv"); }

GraphDataset load_graph_dataset(const fs::path& dir) {
    auto meta = text::parse_key_values(text::read_lines(dir / "meta.txt"), "meta.txt");
    auto need = [&](const char* key) -> long long {
        auto it = meta.find(key);
        if (it == meta.end()) throw DataError(std::string("meta.txt: missing ") + key);
        return text::parse_int(it->second, std::string("meta.txt ") + key);
    };
    const Index num_graphs = need("num_graphs");
    const Index num_classes = need("num_classes");
    const Index d = need("feature_dim");

    GraphDataset ds;
    ds.num_classes = num_classes;
    ds.graphs.resize(static_cast<std::size_t>(num_graphs));
    ds.labels.assign(static_cast<std::size_t>(num_graphs), kUnlabeled);
    std::vector<char> seen(static_cast<std::size_t>(num_graphs), 0);
    const auto index_lines = text::read_lines(dir / "graphs.tsv");
    for (std::size_t i = 0; i < index_lines.size(); ++i) {
        auto f = text::split_ws(index_lines[i]);
        if (f.empty()) continue;
        const std::string ctx = "graphs.tsv:" + std::to_string(i + 1);
        if (f.size() != 3) throw DataError(ctx + ": expected graph_id, node_count, label");
        const auto id = text::parse_int(f[0], ctx);
        const auto n = text::parse_int(f[1], ctx);
        const auto y = text::parse_int(f[2], ctx);
        if (id < 0 || id >= num_graphs || seen[id]) throw DataError(ctx + ": bad or repeated graph id");
        if (n < 1) throw DataError(ctx + ": empty graph");
        if (y != kUnlabeled && (y < 0 || y >= num_classes)) throw DataError(ctx + ": label out of range");
        seen[id] = 1;
        ds.labels[id] = static_cast<Label>(y);

        const std::string name = std::to_string(id) + ".tsv";
        std::vector<Edge> edges;
        for (const auto& line : text::read_lines(dir / "edges" / name)) {
            auto e = text::split_ws(line);
            if (e.empty()) continue;
            if (e.size() != 2) throw DataError("edges/" + name + ": expected two node ids");
            edges.emplace_back(static_cast<NodeId>(text::parse_int(e[0], name)),
                               static_cast<NodeId>(text::parse_int(e[1], name)));
        }
        Matrix x(n, d);
        Index row = 0;
        for (const auto& line : text::read_lines(dir / "features" / name)) {
            auto v = text::split_ws(line);
            if (v.empty()) continue;
            if (row >= n || static_cast<Index>(v.size()) != d) {
                throw DataError("features/" + name + ": shape does not match node_count x feature_dim");
            }
            for (Index j = 0; j < d; ++j) x(row, j) = text::parse_double(v[j], name);
            ++row;
        }
        if (row != n) throw DataError("features/" + name + ": expected " + std::to_string(n) + " rows");
        ds.graphs[id] = build_graph(n, edges, std::move(x), std::vector<Label>(static_cast<std::size_t>(n), kUnlabeled), 0);
    }
    for (Index k = 0; k < num_graphs; ++k) {
        if (!seen[k]) throw DataError("graphs.tsv: graph " + std::to_string(k) + " missing");
    }
    return ds;
}

void save_graph_dataset(const GraphDataset& ds, const fs::path& dir) {
    const Index d = ds.graphs.empty() ? 0 : ds.graphs.front().feature_dim();
    text::write_file(dir / "meta.txt", "num_graphs=" + std::to_string(ds.graphs.size()) +
                                           "\nnum_classes=" + std::to_string(ds.num_classes) +
                                           "\nfeature_dim=" + std::to_string(d) + "\n");
    std::string index;
    for (std::size_t k = 0; k < ds.graphs.size(); ++k) {
        const Graph& g = ds.graphs[k];
        index += std::to_string(k) + "\t" + std::to_string(g.num_nodes) + "\t" + std::to_string(ds.labels[k]) + "\n";
        std::string edges;
        for (auto [u, v] : g.undirected_edges()) edges += std::to_string(u) + "\t" + std::to_string(v) + "\n";
        text::write_file(dir / "edges" / (std::to_string(k) + ".tsv"), edges);
        std::string feats;
        for (Index i = 0; i < g.num_nodes; ++i) feats += text::format_row(g.features.row(i).data(), g.feature_dim()) + "\n";
        text::write_file(dir / "features" / (std::to_string(k) + ".tsv"), feats);
    }
    text::write_file(dir / "graphs.tsv", index);
}

}  // namespace gfmate
