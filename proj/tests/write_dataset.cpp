// Writes synthetic datasets for the command-line test.
//   write_dataset nodes <dir> <seed>    two-block SBM node dataset
//   write_dataset graphs <dir> <seed>   dense-versus-sparse graph classification

#include "gfmate/task_adapter.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>

using namespace gfmate;

int main(int argc, char** argv) {
    if (argc != 4) {
        std::fprintf(stderr, "usage: write_dataset nodes|graphs <dir> <seed>\n");
        return 1;
    }
    const std::string mode = argv[1];
    const auto seed = std::strtoull(argv[3], nullptr, 10);
    if (mode == "nodes") {
        save_graph(generate_sbm({{100, 100}, 0.2, 0.01, 16, 0.65, seed}), argv[2]);
        return 0;
    }
    if (mode != "graphs") return 1;
    GraphDataset ds;
    ds.num_classes = 2;
    for (int k = 0; k < 40; ++k) {
        const bool dense = k % 2 == 1;
        Graph g = generate_sbm({{12}, dense ? 0.5 : 0.15, 0.0, 6, dense ? 2.0 : -2.0, seed * 100 + k});
        g.labels.assign(g.labels.size(), kUnlabeled);
        g.num_classes = 0;
        ds.graphs.push_back(g);
        ds.labels.push_back(dense ? 1 : 0);
    }
    save_graph_dataset(ds, argv[2]);
    return 0;
}
