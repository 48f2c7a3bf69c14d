#include "gfmate/harness.hpp"

#include "gfmate/align.hpp"
#include "gfmate/rng.hpp"
#include "gfmate/text_io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace gfmate {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw DataError("config " + key + ": expected a boolean, got '" + v + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& v, Parse parse) {
    std::vector<T> out;
    for (auto f : text::split_char(v, ',')) {
        auto t = text::trim(f);
        if (!t.empty()) out.push_back(static_cast<T>(parse(t)));
    }
    return out;
}

}  // namespace

void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        const std::string ctx = "config " + key;
        auto real = [&] { return text::parse_double(value, ctx); };
        auto integer = [&] { return static_cast<Index>(text::parse_int(value, ctx)); };
        auto to_real = [&](std::string_view s) { return text::parse_double(s, ctx); };
        auto to_int = [&](std::string_view s) { return text::parse_int(s, ctx); };

        if (key == "shots") cfg.shots = integer();
        else if (key == "n_aug") cfg.n_aug = integer();
        else if (key == "align_dim" || key == "d_a") cfg.align_dim = integer();
        else if (key == "align") cfg.align_target = parse_bool(value, key);
        else if (key == "seeds") cfg.seeds = parse_list<std::uint64_t>(value, to_int);
        else if (key == "use_augmentation") cfg.use_augmentation = parse_bool(value, key);
        else if (key == "use_centroid_prompt") cfg.use_centroid_prompt = parse_bool(value, key);
        else if (key == "use_layer_prompt") cfg.use_layer_prompt = parse_bool(value, key);
        else if (key == "task") {
            if (value == "node") cfg.task = TaskMode::Node;
            else if (value == "graph") cfg.task = TaskMode::Graph;
            else throw DataError(ctx + ": expected node or graph");
        } else if (key == "view") cfg.view = parse_view_mode(value);
        else if (key == "hops") cfg.hops = integer();
        else if (key == "tau") cfg.tune.tau = real();
        else if (key == "gamma") cfg.tune.gamma = real();
        else if (key == "alpha") cfg.tune.alpha = real();
        else if (key == "steps") cfg.tune.steps = integer();
        else if (key == "beta_init_std") cfg.tune.beta_init_std = real();
        else if (key == "patience") cfg.tune.patience = integer();
        else if (key == "lr") cfg.pretrain.learning_rate = real();
        else if (key == "epochs") cfg.pretrain.epochs = integer();
        else if (key == "neg_ratio") cfg.pretrain.neg_ratio = integer();
        else if (key == "adam_beta1") cfg.pretrain.adam_beta1 = real();
        else if (key == "adam_beta2") cfg.pretrain.adam_beta2 = real();
        else if (key == "adam_eps") cfg.pretrain.adam_eps = real();
        else if (key == "hidden_dim") cfg.pretrain.hidden_dim = integer();
        else if (key == "num_layers") cfg.pretrain.num_layers = integer();
        else if (key == "edge_holdout_fraction") cfg.pretrain.edge_holdout_fraction = real();
        else if (key == "slope") cfg.pretrain.activation_slope = real();
        else if (key == "pretrain_seed") cfg.pretrain.seed = static_cast<std::uint64_t>(integer());
        else if (key == "perturb_edge_drop") cfg.perturb_edge_drop = real();
        else if (key == "perturb_feature_shuffle") cfg.perturb_feature_shuffle = real();
        else if (key == "grid_gamma") cfg.grid_gamma = parse_list<double>(value, to_real);
        else if (key == "grid_n_aug") cfg.grid_n_aug = parse_list<Index>(value, to_int);
        else if (key == "grid_alpha") cfg.grid_alpha = parse_list<double>(value, to_real);
        else if (key == "threads") cfg.threads = integer();
        else throw DataError("config: unknown key '" + key + "'");
    }
    if (cfg.seeds.empty()) throw DataError("config: seed list is empty");
    if (cfg.threads < 1) throw DataError("config: threads must be >= 1");
    if (cfg.n_aug < 0) throw DataError("config: n_aug must be >= 0");
    if (cfg.hops < 0) throw DataError("config: hops must be >= 0");
    cfg.tune.validate();
    cfg.pretrain.validate();
}

ExperimentConfig load_config(const std::filesystem::path& file, ExperimentConfig base) {
    apply_config(base, text::parse_key_values(text::read_lines(file), file.filename().string()));
    return base;
}

double accuracy(std::span<const Label> preds, std::span<const Label> truth) {
    if (preds.size() != truth.size()) throw DataError("accuracy: length mismatch");
    if (preds.empty()) throw DataError("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void RunReport::aggregate() {
    std::vector<double> test, val;
    for (const auto& s : seeds) {
        test.push_back(s.test_accuracy);
        val.push_back(s.val_accuracy);
    }
    mean_test = mean(test);
    std_test = sample_std(test);
    mean_val = mean(val);
}

std::string RunReport::to_table() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "seed  test_acc  val_acc  pivot  comp_disagree  best_step  tune_s\n";
    for (const auto& s : seeds) {
        os << s.seed << "  " << s.test_accuracy << "  " << s.val_accuracy << "  " << s.pivot_layer << "  "
           << s.complementary_disagreement << "  " << s.best_step << "  " << s.times.tune << "\n";
    }
    os << "mean test accuracy " << mean_test << " +- " << std_test << " (val " << mean_val << ")\n";
    return os.str();
}

std::string RunReport::to_tsv() const {
    std::string out =
        "seed\ttest_accuracy\tval_accuracy\tpivot_layer\tcomplementary_disagreement\tbest_step\t"
        "encode_s\tadapt_s\ttune_s\tpredict_s\n";
    for (const auto& s : seeds) {
        out += std::to_string(s.seed) + "\t" + text::format_double(s.test_accuracy) + "\t" +
               text::format_double(s.val_accuracy) + "\t" + std::to_string(s.pivot_layer) + "\t" +
               text::format_double(s.complementary_disagreement) + "\t" + std::to_string(s.best_step) + "\t" +
               text::format_double(s.times.encode) + "\t" + text::format_double(s.times.adapt) + "\t" +
               text::format_double(s.times.tune) + "\t" + text::format_double(s.times.predict) + "\n";
    }
    out += "mean\t" + text::format_double(mean_test) + "\t" + text::format_double(mean_val) + "\n";
    out += "std\t" + text::format_double(std_test) + "\n";
    return out;
}

Graph align_graph(const Graph& g, Index dim) {
    Graph out = g;
    out.features = svd_align(g.features, dim).matrix;
    return out;
}

namespace {

LayerEmbeddings node_rows(const Graph& g, const GcnParams& params, const ExperimentConfig& cfg) {
    auto emb = encode(g, as_aligned(g.features), params);
    if (cfg.view == ViewMode::SubgraphMean) return subgraph_view(g, emb, cfg.hops).emb;
    if (cfg.view == ViewMode::GraphMean) throw DataError("node task cannot use the graph-mean view");
    return emb;
}

}  // namespace

ClassificationTarget node_target(const Graph& target, const GcnParams& params, const ExperimentConfig& cfg) {
    ClassificationTarget t;
    t.graph = &target;
    t.params = &params;
    t.rows = node_rows(target, params, cfg);
    t.labels = target.labels;
    t.num_classes = target.num_classes;
    return t;
}

ClassificationTarget graph_target(const GraphDataset& ds, const GcnParams& params) {
    std::vector<LayerEmbeddings> embs;
    embs.reserve(ds.graphs.size());
    for (const auto& g : ds.graphs) embs.push_back(encode(g, as_aligned(g.features), params));
    ClassificationTarget t;
    t.params = &params;
    t.rows = graph_view(ds.graphs, embs).emb;
    t.labels = ds.labels;
    t.num_classes = ds.num_classes;
    return t;
}

GraphDataset align_graph_dataset(const GraphDataset& ds, Index dim) {
    if (ds.graphs.empty()) throw DataError("align_graph_dataset: no graphs");
    Index rows = 0;
    for (const auto& g : ds.graphs) rows += g.num_nodes;
    Matrix stacked(rows, ds.graphs.front().feature_dim());
    Index at = 0;
    for (const auto& g : ds.graphs) {
        if (g.feature_dim() != stacked.cols()) throw DataError("align_graph_dataset: feature widths differ");
        stacked.middleRows(at, g.num_nodes) = g.features;
        at += g.num_nodes;
    }
    const AlignedFeatures a = svd_align(stacked, dim);
    GraphDataset out = ds;
    at = 0;
    for (auto& g : out.graphs) {
        g.features = a.matrix.middleRows(at, g.num_nodes);
        at += g.num_nodes;
    }
    return out;
}

TuneConfig seed_tune_config(const ExperimentConfig& cfg, std::uint64_t seed) {
    TuneConfig t = cfg.tune;
    t.seed = derive_seed(seed, kStreamPrompt);
    if (!cfg.use_centroid_prompt) {
        t.beta_init_std = 0.0;
        t.update_beta = false;
    }
    if (!cfg.use_layer_prompt) t.update_eta = false;
    return t;
}

Adaptation adapt(const LayerEmbeddings& rows, std::span<const Label> labels, Index num_classes,
                 const FewShotSplit& split, const ExperimentConfig& cfg) {
    Adaptation a;
    a.centroids = init_centroids(rows, split.fs_nodes, num_classes);
    a.report = entropy_report(rows, a.centroids, split.test_nodes);
    a.task.few_shot = augment(a.report, split.fs_nodes, cfg.use_augmentation ? cfg.n_aug : 0).combined_fs;
    a.task.complementary = complementary_labels(rows, a.centroids, a.report.pivot_layer, split.test_nodes);
    for (NodeId v : split.val_nodes) a.val.push_back({v, labels[v]});
    return a;
}

namespace {

SeedResult run_seed_impl(const ClassificationTarget& target, const ExperimentConfig& cfg, std::uint64_t seed,
                         bool score_test, const char*& phase) {
    SeedResult r;
    r.seed = seed;
    auto t0 = Clock::now();
    phase = "split";
    const FewShotSplit split =
        make_split(target.labels, target.num_classes, cfg.shots, derive_seed(seed, kStreamSplit));

    const LayerEmbeddings* rows = &target.rows;
    LayerEmbeddings perturbed;
    if (cfg.perturb_edge_drop > 0.0 || cfg.perturb_feature_shuffle > 0.0) {
        if (!target.graph || !target.params) throw DataError("perturbation requires a node-level target");
        std::vector<NodeId> protect;
        for (const auto& ln : split.fs_nodes) protect.push_back(ln.node);
        protect.insert(protect.end(), split.val_nodes.begin(), split.val_nodes.end());
        const Graph g = perturb_graph(*target.graph, cfg.perturb_edge_drop, cfg.perturb_feature_shuffle, protect,
                                      derive_seed(seed, kStreamPerturb));
        phase = "encode";
        auto te = Clock::now();
        perturbed = node_rows(g, *target.params, cfg);
        r.times.encode = seconds_since(te);
        rows = &perturbed;
    }

    phase = "adapt";
    const Adaptation a = adapt(*rows, target.labels, target.num_classes, split, cfg);
    r.pivot_layer = a.report.pivot_layer;
    Index disagree = 0;
    for (const auto& ln : a.task.complementary) disagree += ln.label != target.labels[ln.node];
    r.complementary_disagreement = static_cast<double>(disagree) / static_cast<double>(a.task.complementary.size());
    r.times.adapt = seconds_since(t0);

    phase = "tune";
    t0 = Clock::now();
    const TuneResult tuned = tune(*rows, a.task, a.centroids, seed_tune_config(cfg, seed), a.val);
    r.times.tune = seconds_since(t0);
    r.val_accuracy = tuned.best_val_accuracy;
    r.best_step = tuned.best_step;
    r.initial_loss = tuned.loss_history.front();
    r.final_loss = tuned.loss_history.back();

    r.test_accuracy = std::numeric_limits<double>::quiet_NaN();
    if (score_test) {
        phase = "predict";
        t0 = Clock::now();
        const auto preds = predict(*rows, a.centroids, tuned.prompts, split.test_nodes);
        std::vector<Label> truth;
        for (NodeId v : split.test_nodes) truth.push_back(target.labels[v]);
        r.test_accuracy = accuracy(preds, truth);
        r.times.predict = seconds_since(t0);
    }
    return r;
}

}  // namespace

SeedResult run_seed(const ClassificationTarget& target, const ExperimentConfig& cfg, std::uint64_t seed,
                    bool score_test) {
    const char* phase = "setup";
    const std::string where = "seed " + std::to_string(seed) + ", ";
    try {
        return run_seed_impl(target, cfg, seed, score_test, phase);
    } catch (const NumericalError& e) {
        throw NumericalError(where + phase + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(where + phase + ": " + e.what());
    }
}

RunReport run_experiment(const ClassificationTarget& target, const ExperimentConfig& cfg, bool score_test) {
    RunReport report;
    report.seeds.resize(cfg.seeds.size());
    const auto workers = static_cast<std::size_t>(std::max<Index>(1, std::min<Index>(cfg.threads, static_cast<Index>(cfg.seeds.size()))));
    if (workers == 1) {
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) report.seeds[i] = run_seed(target, cfg, cfg.seeds[i], score_test);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
                    try {
                        report.seeds[i] = run_seed(target, cfg, cfg.seeds[i], score_test);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        pool.clear();
        if (failure) std::rethrow_exception(failure);
    }
    report.aggregate();
    return report;
}

GridResult grid_search(const ClassificationTarget& target, const ExperimentConfig& cfg) {
    if (cfg.grid_gamma.empty() || cfg.grid_n_aug.empty() || cfg.grid_alpha.empty()) {
        throw DataError("grid_search: every grid list must be non-empty");
    }
    GridResult result;
    double best = -1.0;
    for (double gamma : cfg.grid_gamma) {
        for (Index n_aug : cfg.grid_n_aug) {
            for (double alpha : cfg.grid_alpha) {
                ExperimentConfig c = cfg;
                c.tune.gamma = gamma;
                c.n_aug = n_aug;
                c.tune.alpha = alpha;
                const RunReport rep = run_experiment(target, c, /*score_test=*/false);
                result.candidates.push_back({gamma, n_aug, alpha, rep.mean_val});
                if (rep.mean_val > best) {
                    best = rep.mean_val;
                    result.best_index = result.candidates.size() - 1;
                    result.best = c;
                }
            }
        }
    }
    result.report = run_experiment(target, result.best, /*score_test=*/true);
    return result;
}

}  // namespace gfmate
