#include <cmath>
#include <map>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "klever/link.hpp"
#include "klever/store.hpp"
#include "planted.hpp"
#include "support.hpp"

using namespace klever;

TEST(LinkProbability, Values) {
    EXPECT_DOUBLE_EQ(link_probability(std::vector<double>{0, 0}, std::vector<double>{0, 0}), 0.5);
    EXPECT_NEAR(link_probability(std::vector<double>{1, 0}, std::vector<double>{1, 0}), 0.731059, 1e-6);
    EXPECT_NEAR(link_probability(std::vector<double>{2, 1}, std::vector<double>{-1, 0}), 0.119203, 1e-6);
    EXPECT_THROW(link_probability(std::vector<double>{1}, std::vector<double>{1, 2}), DimensionError);
}

TEST(NegativeSampling, CompleteBipartiteGraphIsExhausted) {
    DescriptiveGraph g({"a", "b"}, {"x", "y"});
    for (std::size_t u = 0; u < 2; ++u)
        for (std::size_t w = 0; w < 2; ++w) g.add_edge(u, w);
    EXPECT_THROW(sample_negatives(g, all_positives(g), 1, std::uint64_t{1}), SamplingExhaustedError);
}

TEST(NegativeSampling, FixedSeedIsDeterministicAndNegativesAreNonEdges) {
    auto g = test::planted_graph(1).graph;
    auto a = sample_negatives(g, all_positives(g), 2, std::uint64_t{42});
    auto b = sample_negatives(g, all_positives(g), 2, std::uint64_t{42});
    EXPECT_EQ(a.negatives, b.negatives);
    EXPECT_EQ(a.negatives.size(), 2 * g.num_edges());
    for (const auto& [w, u] : a.negatives) {
        EXPECT_FALSE(g.has_edge(u, w));
    }
}

TEST(NegativeSampling, UniformOverNonNeighbors) {
    // word 0 is linked to items 2, 5, 7 of 10; 10^5 corruptions of one positive
    DescriptiveGraph g({"0", "1", "2", "3", "4", "5", "6", "7", "8", "9"}, {"w"});
    for (std::size_t u : {2, 5, 7}) g.add_edge(u, 0);
    const std::size_t draws = 100000;
    auto batch = sample_negatives(g, {{0, 2}}, draws, std::uint64_t{123});
    std::map<std::size_t, std::size_t> counts;
    for (const auto& [_, u] : batch.negatives) ++counts[u];
    ASSERT_EQ(counts.size(), 7u);
    const double expected = static_cast<double>(draws) / 7.0;
    double chi2 = 0.0;
    for (const auto& [_, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
    const boost::math::chi_squared dist(6.0);
    const double p_value = boost::math::cdf(boost::math::complement(dist, chi2));
    EXPECT_GT(p_value, 0.01) << "chi2 = " << chi2;
}

TEST(LinkLoss, SinglePositiveAtHalf) {
    LinkBatch b{{{0, 0}}, {}};
    auto l = link_loss(b, Tensor::matrix(1, 2), Tensor::matrix(1, 2));
    EXPECT_NEAR(l.loss, 0.693147, 1e-6);
}

TEST(LinkLoss, PositiveAndNegativeAtHalf) {
    LinkBatch b{{{0, 0}}, {{0, 1}}};
    auto l = link_loss(b, Tensor::matrix(2, 2), Tensor::matrix(1, 2));
    EXPECT_NEAR(l.loss, std::log(2.0), 1e-12);
}

TEST(LinkLoss, FullObjectivePassesFiniteDifferences) {
    // 4 items, 5 words, random edges, one GCN layer
    std::mt19937_64 rng(17);
    DescriptiveGraph g({"a", "b", "c", "d"}, {"p", "q", "r", "s", "t"});
    std::bernoulli_distribution coin(0.4);
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t w = 0; w < 5; ++w)
            if (coin(rng)) g.add_edge(u, w);
    g.add_edge(0, 0);
    ParamRegistry reg;
    init_embedding_store(reg, StoreShape{.entities = 4, .words = 5, .dim = 4, .layers = 1, .relations = 0}, rng);
    test::randomize(reg, 3, 0.6);
    const auto batch = sample_negatives(g, all_positives(g), 1, std::uint64_t{5});
    GradCheckOptions opts;
    opts.only = link_parameters(reg);
    auto report = finite_diff_check([&](ParamRegistry& r) { return link_objective(g, r, batch); }, reg, opts);
    EXPECT_TRUE(report.passed) << report.worst_parameter << " " << report.max_relative_error;
    EXPECT_GT(report.entries_checked, 0u);
}

TEST(LinkTraining, ZeroEpochsIsNoOp) {
    auto planted = test::planted_graph(2);
    ParamRegistry reg;
    std::mt19937_64 rng(1);
    init_embedding_store(reg, StoreShape{.entities = 20, .words = 30, .dim = 8, .layers = 1, .relations = 0}, rng);
    const auto before = reg;
    LinkTrainConfig cfg;
    cfg.epochs = 0;
    auto report = train_link_prediction(planted.graph, reg, cfg);
    EXPECT_TRUE(report.epoch_loss.empty());
    for (const auto& name : reg.names()) EXPECT_EQ(reg.value(name), before.value(name)) << name;
}

TEST(LinkTraining, LossStrictlyDecreasesOverFirstTenEpochs) {
    auto planted = test::planted_graph(3);
    ParamRegistry reg;
    std::mt19937_64 rng(4);
    init_embedding_store(reg, StoreShape{.entities = 20, .words = 30, .dim = 16, .layers = 1, .relations = 0}, rng);
    LinkTrainConfig cfg;
    cfg.epochs = 10;
    cfg.lr = 1e-3;
    cfg.resample_negatives = false;
    auto report = train_link_prediction(planted.train, reg, cfg);
    ASSERT_EQ(report.epoch_loss.size(), 10u);
    for (std::size_t e = 1; e < 10; ++e) {
        EXPECT_LT(report.epoch_loss[e], report.epoch_loss[e - 1]) << "epoch " << e;
    }
}

TEST(LinkTraining, RunsAreReproducible) {
    auto planted = test::planted_graph(5);
    auto run = [&] {
        ParamRegistry reg;
        std::mt19937_64 rng(6);
        init_embedding_store(reg, StoreShape{.entities = 20, .words = 30, .dim = 8, .layers = 1, .relations = 0}, rng);
        LinkTrainConfig cfg;
        cfg.epochs = 5;
        cfg.batch_size = 16;
        return train_link_prediction(planted.train, reg, cfg).epoch_loss;
    };
    EXPECT_EQ(run(), run());
}

TEST(LinkTraining, NoEdgesIsAnError) {
    DescriptiveGraph g({"a"}, {"x"});
    ParamRegistry reg;
    std::mt19937_64 rng(1);
    init_embedding_store(reg, StoreShape{.entities = 1, .words = 1, .dim = 2, .layers = 1, .relations = 0}, rng);
    EXPECT_THROW(train_link_prediction(g, reg, {}), Error);
}

TEST(Auc, ExhaustiveOracleOnKnownScores) {
    // positives {0.9, 0.4}, negatives {0.5, 0.1, 0.4}: wins 3 + 1 + 0.5 tie = 4.5 of 6
    EXPECT_DOUBLE_EQ(test::exhaustive_auc({0.9, 0.4}, {0.5, 0.1, 0.4}), 4.5 / 6.0);
}
