#pragma once

#include "gfmate/centroid.hpp"
#include "gfmate/common.hpp"
#include "gfmate/gcn.hpp"
#include "gfmate/graph.hpp"
#include "gfmate/pretrain.hpp"
#include "gfmate/prompt.hpp"
#include "gfmate/task_adapter.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gfmate {

enum class TaskMode { Node, Graph };

struct ExperimentConfig {
    // Paths, used by the command-line front end only.
    std::vector<std::filesystem::path> sources;
    std::filesystem::path target;
    std::filesystem::path model;
    std::filesystem::path split;
    std::filesystem::path output;

    // Ablation toggles.
    bool use_augmentation = true;
    bool use_centroid_prompt = true;
    bool use_layer_prompt = true;

    TaskMode task = TaskMode::Node;
    ViewMode view = ViewMode::RawNode;  // node tasks: raw rows or subgraph means
    Index hops = 1;

    TuneConfig tune;
    PretrainConfig pretrain;
    Index n_aug = 10;
    Index align_dim = 100;
    bool align_target = true;
    Index shots = 1;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

    // Test-time perturbation of the target, applied per seed after the split
    // with the few-shot and validation nodes protected.
    double perturb_edge_drop = 0.0;
    double perturb_feature_shuffle = 0.0;

    // Grid search lists.
    std::vector<double> grid_gamma{0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<Index> grid_n_aug{1, 11, 21, 31, 41, 51, 61, 71, 81, 91};
    std::vector<double> grid_alpha{1e-2};

    Index threads = 1;
};

/// Overwrites fields from `key=value` pairs. Unknown keys are errors.
void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv);
ExperimentConfig load_config(const std::filesystem::path& file, ExperimentConfig base = {});

struct PhaseTimes {
    double encode = 0.0;
    double adapt = 0.0;  // split, centroids, entropy, augmentation, complementary labels
    double tune = 0.0;
    double predict = 0.0;
};

struct SeedResult {
    std::uint64_t seed = 0;
    double test_accuracy = 0.0;  // NaN when test scoring was not requested
    double val_accuracy = 0.0;
    Index pivot_layer = 0;
    double complementary_disagreement = 0.0;  // fraction of test nodes whose complementary label != truth
    Index best_step = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    PhaseTimes times;
};

struct RunReport {
    std::vector<SeedResult> seeds;
    double mean_test = 0.0;
    double std_test = 0.0;  // sample standard deviation
    double mean_val = 0.0;

    /// Fills the aggregates from `seeds`.
    void aggregate();
    std::string to_table() const;
    std::string to_tsv() const;
};

double accuracy(std::span<const Label> preds, std::span<const Label> truth);

double mean(std::span<const double> v);
double sample_std(std::span<const double> v);

/// Copy of `g` whose features are SVD-aligned to `dim` columns.
Graph align_graph(const Graph& g, Index dim);

/// Rows to classify and their labels, prepared once per experiment.
struct ClassificationTarget {
    const Graph* graph = nullptr;  // node tasks; needed for perturbation and subgraph views
    const GcnParams* params = nullptr;
    LayerEmbeddings rows;          // pre-computed view (graph tasks or unperturbed node tasks)
    std::vector<Label> labels;
    Index num_classes = 0;
};

/// Node classification: `target` features must already be aligned to the
/// model input width.
ClassificationTarget node_target(const Graph& target, const GcnParams& params, const ExperimentConfig& cfg);

/// Graph classification: each graph's features must already be aligned.
ClassificationTarget graph_target(const GraphDataset& ds, const GcnParams& params);

/// Graph-classification datasets share one SVD basis fitted on all node rows
/// stacked, so every graph lands in the same coordinates.
GraphDataset align_graph_dataset(const GraphDataset& ds, Index dim);

/// Everything tune needs, derived from the split without test labels.
struct Adaptation {
    Centroids centroids;
    EntropyReport report;
    TgclTask task;
    std::vector<LabeledNode> val;
};

Adaptation adapt(const LayerEmbeddings& rows, std::span<const Label> labels, Index num_classes,
                 const FewShotSplit& split, const ExperimentConfig& cfg);

/// cfg.tune with the per-seed prompt stream and the prompt toggles applied.
TuneConfig seed_tune_config(const ExperimentConfig& cfg, std::uint64_t seed);

/// One seed of the full pipeline: split, centroids, entropy, augmentation,
/// complementary labels, prompt tuning, prediction.
SeedResult run_seed(const ClassificationTarget& target, const ExperimentConfig& cfg, std::uint64_t seed,
                    bool score_test = true);

/// Every configured seed; seeds run on up to cfg.threads threads.
RunReport run_experiment(const ClassificationTarget& target, const ExperimentConfig& cfg,
                         bool score_test = true);

struct GridCandidate {
    double gamma = 0.0;
    Index n_aug = 0;
    double alpha = 0.0;
    double mean_val = 0.0;
};

struct GridResult {
    ExperimentConfig best;
    RunReport report;  // test scores of the selected configuration only
    std::vector<GridCandidate> candidates;
    std::size_t best_index = 0;
};

/// Selects by mean validation accuracy, gamma-major then n_aug then alpha
/// order; the first candidate wins ties.
GridResult grid_search(const ClassificationTarget& target, const ExperimentConfig& cfg);

/// Stream tags for derive_seed.
enum SeedStream : std::uint64_t {
    kStreamSplit = 11,
    kStreamPrompt = 12,
    kStreamPerturb = 13,
};

}  // namespace gfmate
