#pragma once

#include "gfmate/common.hpp"
#include "gfmate/gcn.hpp"
#include "gfmate/graph.hpp"

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace gfmate {

enum class ViewMode { RawNode, SubgraphMean, GraphMean };

ViewMode parse_view_mode(std::string_view s);
std::string_view to_string(ViewMode m);

/// Per-layer representations the classifier actually sees. In node modes
/// there is one row per node; in graph mode one row per graph.
struct EmbeddingView {
    ViewMode mode = ViewMode::RawNode;
    Index hops = 0;
    LayerEmbeddings emb;
};

/// Each row becomes the mean of the rows within `hops` BFS steps of it
/// (itself included).
EmbeddingView subgraph_view(const Graph& g, const LayerEmbeddings& emb, Index hops);

/// One row per graph: the mean of that graph's node rows, per layer.
EmbeddingView graph_view(std::span<const Graph> graphs, std::span<const LayerEmbeddings> embs);

/// A graph-classification dataset.
///
/// On disk:
///   meta.txt           num_graphs=, num_classes=, feature_dim=
///   graphs.tsv         graph_id<TAB>node_count<TAB>label, ids 0..num_graphs-1
///   edges/<id>.tsv     src<TAB>dst per line, node ids local to the graph
///   features/<id>.tsv  node_count rows of feature_dim values
struct GraphDataset {
    std::vector<Graph> graphs;
    std::vector<Label> labels;
    Index num_classes = 0;
};

GraphDataset load_graph_dataset(const std::filesystem::path& dir);
void save_graph_dataset(const GraphDataset& ds, const std::filesystem::path& dir);

/// Recognises the graph-classification layout by the presence of graphs.tsv.
bool is_graph_dataset(const std::filesystem::path& dir);

}  // namespace gfmate
