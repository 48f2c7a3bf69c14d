#include "gfmate/harness.hpp"
#include "gfmate/text_io.hpp"
#include "sbm_fixture.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gfmate;
using gfmate::oracle::TempDir;

namespace {

// Small fixture shared by the suite; pre-training runs once.
const oracle::SbmFixture& fixture() {
    static const auto f = [] {
        oracle::SbmFixtureOptions o;
        o.epochs = 50;
        o.source_seed = 11;
        o.target_seed = 12;
        return oracle::make_sbm_fixture(o);
    }();
    return *f;
}

bool same_scores(const RunReport& a, const RunReport& b) {
    if (a.seeds.size() != b.seeds.size()) return false;
    for (std::size_t i = 0; i < a.seeds.size(); ++i) {
        const auto& x = a.seeds[i];
        const auto& y = b.seeds[i];
        if (x.test_accuracy != y.test_accuracy || x.val_accuracy != y.val_accuracy ||
            x.pivot_layer != y.pivot_layer || x.best_step != y.best_step || x.initial_loss != y.initial_loss ||
            x.final_loss != y.final_loss || x.complementary_disagreement != y.complementary_disagreement) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST(Accuracy, Cases) {
    std::vector<Label> a{0, 1, 2}, b{0, 1, 0}, c{1, 2, 0};
    EXPECT_EQ(accuracy(a, a), 1.0);
    EXPECT_EQ(accuracy(a, c), 0.0);
    EXPECT_DOUBLE_EQ(accuracy(a, b), 2.0 / 3.0);
    EXPECT_THROW(accuracy(a, std::vector<Label>{0}), DataError);
    EXPECT_THROW(accuracy(std::vector<Label>{}, std::vector<Label>{}), DataError);
}

TEST(Stats, MeanAndSampleStd) {
    std::vector<double> v{1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(mean(v), 2.5);
    EXPECT_NEAR(sample_std(v), std::sqrt(5.0 / 3.0), 1e-15);
    EXPECT_EQ(sample_std(std::vector<double>{7}), 0.0);
}

TEST(Config, ParsesKnownKeys) {
    TempDir tmp("cfg");
    text::write_file(tmp.path() / "run.cfg",
                     "# comment\nshots=3\nseeds=4,5\ngamma=0.25\nuse_augmentation=false\nview=subgraph\n"
                     "hops=2\ngrid_n_aug=1,5\nlr=0.01\n");
    auto cfg = load_config(tmp.path() / "run.cfg");
    EXPECT_EQ(cfg.shots, 3);
    EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{4, 5}));
    EXPECT_EQ(cfg.tune.gamma, 0.25);
    EXPECT_FALSE(cfg.use_augmentation);
    EXPECT_EQ(cfg.view, ViewMode::SubgraphMean);
    EXPECT_EQ(cfg.hops, 2);
    EXPECT_EQ(cfg.grid_n_aug, (std::vector<Index>{1, 5}));
    EXPECT_EQ(cfg.pretrain.learning_rate, 0.01);
}

TEST(Config, RejectsUnknownAndInvalid) {
    ExperimentConfig cfg;
    EXPECT_THROW(apply_config(cfg, {{"gama", "0.5"}}), DataError);
    EXPECT_THROW(apply_config(cfg, {{"gamma", "1.5"}}), DataError);
    EXPECT_THROW(apply_config(cfg, {{"use_augmentation", "maybe"}}), DataError);
    EXPECT_THROW(apply_config(cfg, {{"seeds", ""}}), DataError);
    EXPECT_THROW(apply_config(cfg, {{"tau", "abc"}}), DataError);
    TempDir tmp("cfg_dup");
    text::write_file(tmp.path() / "dup.cfg", "tau=1\ntau=2\n");
    EXPECT_THROW(load_config(tmp.path() / "dup.cfg"), DataError);
}

TEST(RunExperiment, FrozenBaselineIsNearestMeanCentroid) {
    const auto& f = fixture();
    ExperimentConfig cfg = oracle::frozen_baseline(ExperimentConfig{});
    cfg.seeds = {0, 1, 2};
    auto target = node_target(f.target, f.params, cfg);
    auto report = run_experiment(target, cfg);
    for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
        auto split = make_split(f.target, 1, derive_seed(cfg.seeds[k], kStreamSplit));
        const auto& emb = target.rows;
        Index hits = 0;
        for (NodeId v : split.test_nodes) {
            // Independent ensemble: sum over layers of cosine to the shot rows.
            Label best = 0;
            double best_score = -1e300;
            for (const auto& ln : split.fs_nodes) {
                double score = 0;
                for (const auto& h : emb.layers) {
                    score += oracle::naive_cosine(h.row(v).data(), h.row(ln.node).data(), h.cols());
                }
                if (score > best_score) {
                    best_score = score;
                    best = ln.label;
                }
            }
            hits += best == f.target.labels[v];
        }
        EXPECT_DOUBLE_EQ(report.seeds[k].test_accuracy,
                         static_cast<double>(hits) / static_cast<double>(split.test_nodes.size()));
    }
}

TEST(RunExperiment, ToggleAlgebra) {
    const auto& f = fixture();
    ExperimentConfig base;
    base.seeds = {0, 1};
    base.tune.steps = 20;
    auto target = node_target(f.target, f.params, base);

    ExperimentConfig off = base;
    off.use_augmentation = false;
    ExperimentConfig neutral = base;
    neutral.n_aug = 0;
    EXPECT_TRUE(same_scores(run_experiment(target, off), run_experiment(target, neutral)));

    ExperimentConfig all_off = oracle::frozen_baseline(base);
    all_off.tune.steps = 20;
    ExperimentConfig manual = base;
    manual.n_aug = 0;
    manual.tune.alpha = 0.0;
    manual.tune.beta_init_std = 0.0;
    EXPECT_TRUE(same_scores(run_experiment(target, all_off), run_experiment(target, manual)));
}

TEST(RunExperiment, ReportBoundsAndThreads) {
    const auto& f = fixture();
    ExperimentConfig cfg;
    cfg.tune.steps = 30;
    auto target = node_target(f.target, f.params, cfg);
    auto serial = run_experiment(target, cfg);
    ASSERT_EQ(serial.seeds.size(), 5u);
    EXPECT_GE(serial.mean_test, 0.0);
    EXPECT_LE(serial.mean_test, 1.0);
    EXPECT_GE(serial.std_test, 0.0);
    std::vector<double> acc;
    for (auto& s : serial.seeds) acc.push_back(s.test_accuracy);
    EXPECT_DOUBLE_EQ(serial.mean_test, mean(acc));
    EXPECT_DOUBLE_EQ(serial.std_test, sample_std(acc));

    cfg.threads = 3;
    EXPECT_TRUE(same_scores(serial, run_experiment(target, cfg)));
}

TEST(RunExperiment, ErrorsCarryPhase) {
    const auto& f = fixture();
    ExperimentConfig cfg;
    cfg.shots = 1000;
    auto target = node_target(f.target, f.params, cfg);
    try {
        run_seed(target, cfg, 0);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("split"), std::string::npos);
    }
}

TEST(RunExperiment, TestScoresOnlyWhenAsked) {
    const auto& f = fixture();
    ExperimentConfig cfg;
    cfg.tune.steps = 5;
    auto target = node_target(f.target, f.params, cfg);
    EXPECT_TRUE(std::isnan(run_seed(target, cfg, 0, false).test_accuracy));
}

TEST(GridSearch, SingletonReturnsIt) {
    const auto& f = fixture();
    ExperimentConfig cfg;
    cfg.seeds = {0, 1};
    cfg.tune.steps = 20;
    cfg.grid_gamma = {0.3};
    cfg.grid_n_aug = {5};
    cfg.grid_alpha = {0.05};
    auto target = node_target(f.target, f.params, cfg);
    auto g = grid_search(target, cfg);
    EXPECT_EQ(g.candidates.size(), 1u);
    EXPECT_EQ(g.best.tune.gamma, 0.3);
    EXPECT_EQ(g.best.n_aug, 5);
    EXPECT_EQ(g.best.tune.alpha, 0.05);
    EXPECT_FALSE(std::isnan(g.report.mean_test));
}

TEST(GridSearch, IdenticalCandidatesPickFirst) {
    const auto& f = fixture();
    ExperimentConfig cfg;
    cfg.seeds = {0};
    cfg.tune.steps = 10;
    cfg.grid_gamma = {0.5, 0.5, 0.5};
    cfg.grid_n_aug = {10};
    cfg.grid_alpha = {1e-2};
    auto target = node_target(f.target, f.params, cfg);
    auto g = grid_search(target, cfg);
    EXPECT_EQ(g.best_index, 0u);
    EXPECT_EQ(g.candidates[0].mean_val, g.candidates[2].mean_val);
}

TEST(GridSearch, PrefersLearningOverFrozen) {
    const auto& f = fixture();
    ExperimentConfig cfg;
    cfg.grid_gamma = {0.5};
    cfg.grid_n_aug = {10};
    cfg.grid_alpha = {0.0, 1e-2};
    auto target = node_target(f.target, f.params, cfg);
    auto g = grid_search(target, cfg);
    ASSERT_EQ(g.candidates.size(), 2u);
    EXPECT_GT(g.candidates[1].mean_val, g.candidates[0].mean_val);
    EXPECT_EQ(g.best_index, 1u);
}

TEST(GridSearch, EmptyGridIsError) {
    const auto& f = fixture();
    ExperimentConfig cfg;
    cfg.grid_alpha = {};
    auto target = node_target(f.target, f.params, cfg);
    EXPECT_THROW(grid_search(target, cfg), DataError);
}

TEST(GraphTask, RunsEndToEnd) {
    // Two graph classes: dense versus sparse random graphs.
    Rng rng(5);
    GraphDataset ds;
    ds.num_classes = 2;
    for (int k = 0; k < 40; ++k) {
        Graph g = oracle::random_graph(rng, 8, k % 2 ? 0.8 : 0.1, 4);
        g.features.col(0).array() += k % 2 ? 2.0 : -2.0;
        ds.graphs.push_back(g);
        ds.labels.push_back(static_cast<Label>(k % 2));
    }
    GcnParams params = init_params({4, 4, 4}, 0.25, 3);
    auto target = graph_target(ds, params);
    EXPECT_EQ(target.rows.num_rows(), 40);
    ExperimentConfig cfg;
    cfg.tune.steps = 20;
    cfg.n_aug = 2;
    auto r = run_experiment(target, cfg);
    EXPECT_GE(r.mean_test, 0.0);
    EXPECT_LE(r.mean_test, 1.0);
}

TEST(GraphTask, JointAlignmentSharesOneBasis) {
    Rng rng(9);
    GraphDataset ds;
    ds.num_classes = 2;
    Matrix stacked(0, 6);
    for (int k = 0; k < 5; ++k) {
        Graph g = oracle::random_graph(rng, 2 + k, 0.5, 6);
        Matrix grown(stacked.rows() + g.num_nodes, 6);
        grown << stacked, g.features;
        stacked = grown;
        ds.graphs.push_back(g);
        ds.labels.push_back(static_cast<Label>(k % 2));
    }
    auto aligned = align_graph_dataset(ds, 4);
    // Same Gram matrix as the stacked rows projected on their top-4 subspace.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeThinV);
    Eigen::MatrixXd proj = stacked * svd.matrixV().leftCols(4);
    Index at = 0;
    for (const auto& g : aligned.graphs) {
        ASSERT_EQ(g.features.cols(), 4);
        Eigen::MatrixXd mine = g.features;
        Eigen::MatrixXd ref = proj.middleRows(at, g.num_nodes);
        EXPECT_LT((mine * mine.transpose() - ref * ref.transpose()).cwiseAbs().maxCoeff(), 1e-9);
        at += g.num_nodes;
    }
    // Cross-graph inner products survive too, which per-graph bases would not give.
    Eigen::MatrixXd a0 = aligned.graphs[0].features, a4 = aligned.graphs[4].features;
    EXPECT_LT((a0 * a4.transpose() - proj.topRows(2) * proj.bottomRows(6).transpose()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_THROW(align_graph_dataset(GraphDataset{}, 4), DataError);
}

TEST(Adapt, UsesNoTestLabels) {
    const auto& f = fixture();
    ExperimentConfig cfg;
    auto target = node_target(f.target, f.params, cfg);
    auto split = make_split(target.labels, target.num_classes, 1, 3);
    auto a = adapt(target.rows, target.labels, target.num_classes, split, cfg);
    auto scrambled = target.labels;
    for (NodeId v : split.test_nodes) scrambled[v] = (scrambled[v] + 1) % 2;
    auto b = adapt(target.rows, scrambled, target.num_classes, split, cfg);
    EXPECT_EQ(a.task.few_shot, b.task.few_shot);
    EXPECT_EQ(a.task.complementary, b.task.complementary);
    EXPECT_EQ(a.val, b.val);
    EXPECT_EQ(a.task.few_shot.size(), split.fs_nodes.size() + 2 * 10);
}
