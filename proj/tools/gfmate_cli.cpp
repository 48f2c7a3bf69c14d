// gfmate: command-line front end.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical error.

#include "gfmate/harness.hpp"
#include "gfmate/rng.hpp"
#include "gfmate/text_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace gfmate;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string config;
    Index threads = 0;
    std::string task;
};

ExperimentConfig make_config(const Globals& g) {
    ExperimentConfig cfg;
    if (!g.config.empty()) cfg = load_config(g.config);
    if (g.threads > 0) cfg.threads = g.threads;
    if (g.seed_given) cfg.seeds = {g.seed};
    if (g.task == "graph") cfg.task = TaskMode::Graph;
    else if (g.task == "node") cfg.task = TaskMode::Node;
    return cfg;
}

void emit(const std::string& out, const std::string& contents) {
    if (out.empty() || out == "-") {
        std::cout << contents;
    } else {
        text::write_file(out, contents);
    }
}

// A loaded target with its model; owns the graph the target points into.
struct Workspace {
    Graph graph;
    GraphDataset dataset;
    GcnParams params;
    ClassificationTarget target;
};

std::unique_ptr<Workspace> open_target(const fs::path& dir, GcnParams params, const ExperimentConfig& cfg) {
    auto w = std::make_unique<Workspace>();
    w->params = std::move(params);
    const bool graph_task = cfg.task == TaskMode::Graph || is_graph_dataset(dir);
    if (cfg.task == TaskMode::Graph && !is_graph_dataset(dir)) {
        throw DataError(dir.string() + ": --task graph needs a graphs.tsv dataset");
    }
    if (graph_task) {
        w->dataset = load_graph_dataset(dir);
        if (cfg.align_target) w->dataset = align_graph_dataset(w->dataset, cfg.align_dim);
        w->target = graph_target(w->dataset, w->params);
    } else {
        w->graph = load_graph(dir);
        if (cfg.align_target) w->graph = align_graph(w->graph, cfg.align_dim);
        w->target = node_target(w->graph, w->params, cfg);
    }
    return w;
}

// Labels and class count of either dataset layout.
std::pair<std::vector<Label>, Index> dataset_labels(const fs::path& dir) {
    if (is_graph_dataset(dir)) {
        auto ds = load_graph_dataset(dir);
        return {ds.labels, ds.num_classes};
    }
    auto g = load_graph(dir);
    return {g.labels, g.num_classes};
}

std::string labeled_tsv(const std::vector<NodeId>& nodes, const std::vector<Label>& labels) {
    std::string out;
    for (std::size_t i = 0; i < nodes.size(); ++i) out += std::to_string(nodes[i]) + "\t" + std::to_string(labels[i]) + "\n";
    return out;
}

std::vector<Graph> load_sources(const std::string& list, const ExperimentConfig& cfg) {
    std::vector<Graph> out;
    for (auto part : text::split_char(list, ',')) {
        const fs::path dir{std::string(text::trim(part))};
        if (is_graph_dataset(dir)) {
            auto ds = load_graph_dataset(dir);
            if (cfg.align_target) ds = align_graph_dataset(ds, cfg.align_dim);
            for (auto& g : ds.graphs) out.push_back(std::move(g));
        } else {
            Graph g = load_graph(dir);
            out.push_back(cfg.align_target ? align_graph(g, cfg.align_dim) : std::move(g));
        }
    }
    if (out.empty()) throw DataError("--sources: no datasets given");
    return out;
}

std::string grid_tsv(const GridResult& g) {
    std::string out = "gamma\tn_aug\talpha\tmean_val\tselected\n";
    for (std::size_t i = 0; i < g.candidates.size(); ++i) {
        const auto& c = g.candidates[i];
        out += text::format_double(c.gamma) + "\t" + std::to_string(c.n_aug) + "\t" + text::format_double(c.alpha) +
               "\t" + text::format_double(c.mean_val) + "\t" + (i == g.best_index ? "1" : "0") + "\n";
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Test-time prompt tuning for a frozen pre-trained GCN"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Run seed (run/grid: replaces the seed list)")
        ->each([&](const std::string&) { g.seed_given = true; });
    app.add_option("--config", g.config, "key=value configuration file");
    app.add_option("--threads", g.threads, "Worker threads for multi-seed runs")->check(CLI::PositiveNumber);
    app.add_option("--task", g.task, "node or graph (default: detected from the dataset)")
        ->check(CLI::IsMember({"node", "graph"}));

    std::string graph_dir, model, split_file, prompts_file, preds_file, out, sources;
    Index dim = -1, shots = -1;
    double edge_drop = 0.0, feature_shuffle = 0.0;

    auto* pretrain_cmd = app.add_subcommand("pretrain", "Link-prediction pre-training on source graphs");
    pretrain_cmd->add_option("--sources", sources, "Comma-separated dataset directories")->required();
    pretrain_cmd->add_option("--out", out, "Model file")->required();

    auto* align_cmd = app.add_subcommand("align", "Write an SVD-aligned copy of a dataset");
    align_cmd->add_option("--graph", graph_dir, "Dataset directory")->required();
    align_cmd->add_option("--out", out, "Output directory")->required();
    align_cmd->add_option("--dim", dim, "Aligned width (default align_dim)");

    auto* split_cmd = app.add_subcommand("split", "Sample a few-shot / validation / test split");
    split_cmd->add_option("--graph", graph_dir)->required();
    split_cmd->add_option("--shots", shots, "Labelled items per class (default shots)");
    split_cmd->add_option("--out", out, "split.tsv")->required();

    auto* perturb_cmd = app.add_subcommand("perturb", "Drop edges and shuffle features of unprotected nodes");
    perturb_cmd->add_option("--graph", graph_dir)->required();
    perturb_cmd->add_option("--out", out, "Output directory")->required();
    perturb_cmd->add_option("--edge-drop", edge_drop)->check(CLI::Range(0.0, 1.0));
    perturb_cmd->add_option("--feature-shuffle", feature_shuffle)->check(CLI::Range(0.0, 1.0));
    perturb_cmd->add_option("--split", split_file, "Protect the fs and val nodes of this split");

    auto split_based = [&](CLI::App* cmd) {
        cmd->add_option("--graph", graph_dir, "Target dataset directory")->required();
        cmd->add_option("--model", model, "Pre-trained model file")->required();
        cmd->add_option("--split", split_file, "split.tsv")->required();
    };
    auto* tune_cmd = app.add_subcommand("tune", "Tune prompts on one split");
    split_based(tune_cmd);
    tune_cmd->add_option("--out", out, "Prompt file")->required();

    auto* predict_cmd = app.add_subcommand("predict", "Predict the test items of a split");
    split_based(predict_cmd);
    predict_cmd->add_option("--prompts", prompts_file)->required();
    predict_cmd->add_option("--out", out, "preds.tsv (default stdout)");

    auto* eval_cmd = app.add_subcommand("eval", "Score predictions against dataset labels");
    eval_cmd->add_option("--graph", graph_dir)->required();
    eval_cmd->add_option("--preds", preds_file)->required();

    auto* entropy_cmd = app.add_subcommand("inspect-entropy", "Per-layer mean entropy and the pivot layer");
    split_based(entropy_cmd);
    entropy_cmd->add_option("--out", out, "TSV file (default stdout)");

    auto* centroids_cmd = app.add_subcommand("export-centroids", "Write per-layer class centroids");
    split_based(centroids_cmd);
    centroids_cmd->add_option("--prompts", prompts_file, "Add tuned centroid prompts");
    centroids_cmd->add_option("--out", out, "centroids.tsv (default stdout)");

    auto experiment = [&](CLI::App* cmd) {
        cmd->add_option("--target", graph_dir, "Target dataset directory")->required();
        cmd->add_option("--model", model, "Pre-trained model file (or use --sources)");
        cmd->add_option("--sources", sources, "Pre-train on these first");
        cmd->add_option("--out", out, "TSV report");
    };
    auto* run_cmd = app.add_subcommand("run", "End-to-end run over every seed");
    experiment(run_cmd);
    auto* grid_cmd = app.add_subcommand("grid", "Grid search over gamma, n_aug and alpha by validation accuracy");
    experiment(grid_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        ExperimentConfig cfg = make_config(g);
        const std::uint64_t seed = g.seed;

        if (pretrain_cmd->parsed()) {
            if (g.seed_given) cfg.pretrain.seed = seed;
            const auto graphs = load_sources(sources, cfg);
            const auto r = pretrain(graphs, cfg.pretrain);
            save_params(r.params, out);
            std::printf("best_epoch\t%lld\nbest_auc\t%s\n", static_cast<long long>(r.best_epoch),
                        text::format_double(r.best_auc).c_str());
        } else if (align_cmd->parsed()) {
            const Index d = dim > 0 ? dim : cfg.align_dim;
            if (is_graph_dataset(graph_dir)) {
                save_graph_dataset(align_graph_dataset(load_graph_dataset(graph_dir), d), out);
            } else {
                save_graph(align_graph(load_graph(graph_dir), d), out);
            }
        } else if (split_cmd->parsed()) {
            const auto [labels, classes] = dataset_labels(graph_dir);
            save_split(make_split(labels, classes, shots > 0 ? shots : cfg.shots, derive_seed(seed, kStreamSplit)), out);
        } else if (perturb_cmd->parsed()) {
            const Graph graph = load_graph(graph_dir);
            std::vector<NodeId> protect;
            if (!split_file.empty()) {
                const auto sp = load_split(split_file, graph.labels);
                for (const auto& ln : sp.fs_nodes) protect.push_back(ln.node);
                protect.insert(protect.end(), sp.val_nodes.begin(), sp.val_nodes.end());
            }
            save_graph(perturb_graph(graph, edge_drop, feature_shuffle, protect, derive_seed(seed, kStreamPerturb)), out);
        } else if (tune_cmd->parsed() || predict_cmd->parsed() || entropy_cmd->parsed() || centroids_cmd->parsed()) {
            const auto w = open_target(graph_dir, load_params(model), cfg);
            const auto& t = w->target;
            const auto sp = load_split(split_file, t.labels);
            const Adaptation a = adapt(t.rows, t.labels, t.num_classes, sp, cfg);
            if (tune_cmd->parsed()) {
                const auto r = tune(t.rows, a.task, a.centroids, seed_tune_config(cfg, seed), a.val);
                save_prompts(r.prompts, out);
                std::printf("pivot_layer\t%lld\nbest_step\t%lld\nbest_val_accuracy\t%s\ninitial_loss\t%s\nfinal_loss\t%s\n",
                            static_cast<long long>(a.report.pivot_layer), static_cast<long long>(r.best_step),
                            text::format_double(r.best_val_accuracy).c_str(),
                            text::format_double(r.loss_history.front()).c_str(),
                            text::format_double(r.loss_history.back()).c_str());
            } else if (predict_cmd->parsed()) {
                const auto prompts = load_prompts(prompts_file);
                emit(out, labeled_tsv(sp.test_nodes, predict(t.rows, a.centroids, prompts, sp.test_nodes)));
            } else if (entropy_cmd->parsed()) {
                std::string tsv = "layer\tmean_entropy\tis_pivot\n";
                for (Index l = 0; l < a.report.mean_entropy.size(); ++l) {
                    tsv += std::to_string(l) + "\t" + text::format_double(a.report.mean_entropy(l)) + "\t" +
                           (l == a.report.pivot_layer ? "1" : "0") + "\n";
                }
                emit(out, tsv);
            } else {
                Centroids c = a.centroids;
                if (!prompts_file.empty()) c = prompted_centroids(c, load_prompts(prompts_file));
                std::string tsv;
                for (std::size_t l = 0; l < c.layers.size(); ++l) {
                    for (Index k = 0; k < c.layers[l].rows(); ++k) {
                        tsv += std::to_string(l) + "\t" + std::to_string(k) + "\t" +
                               text::format_row(c.layers[l].row(k).data(), c.layers[l].cols()) + "\n";
                    }
                }
                emit(out, tsv);
            }
        } else if (eval_cmd->parsed()) {
            const auto labels = dataset_labels(graph_dir).first;
            std::vector<Label> preds, truth;
            for (const auto& line : text::read_lines(preds_file)) {
                const auto f = text::split_ws(line);
                if (f.empty()) continue;
                if (f.size() != 2) throw DataError(preds_file + ": expected node_id<TAB>label, got '" + line + "'");
                const auto id = text::parse_int(f[0], preds_file);
                if (id < 0 || id >= static_cast<long long>(labels.size())) {
                    throw DataError(preds_file + ": id " + std::to_string(id) + " out of range");
                }
                preds.push_back(static_cast<Label>(text::parse_int(f[1], preds_file)));
                truth.push_back(labels[static_cast<std::size_t>(id)]);
            }
            std::printf("accuracy\t%s\ncount\t%zu\n", text::format_double(accuracy(preds, truth)).c_str(), preds.size());
        } else {
            if (model.empty() == sources.empty()) throw DataError("give exactly one of --model and --sources");
            const auto w = open_target(
                graph_dir, sources.empty() ? load_params(model) : pretrain(load_sources(sources, cfg), cfg.pretrain).params,
                cfg);
            if (run_cmd->parsed()) {
                const auto report = run_experiment(w->target, cfg);
                std::cout << report.to_table();
                if (!out.empty()) text::write_file(out, report.to_tsv());
            } else {
                const auto r = grid_search(w->target, cfg);
                std::cout << grid_tsv(r) << r.report.to_table();
                if (!out.empty()) text::write_file(out, grid_tsv(r) + r.report.to_tsv());
            }
        }
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    }
    return 0;
}
