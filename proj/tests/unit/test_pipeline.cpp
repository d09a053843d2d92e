#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "gradient_check.hpp"
#include "oracles.hpp"
#include "swm/errors.hpp"
#include "swm/pipeline.hpp"

namespace swm {
namespace {

Architecture arch_with(std::uint32_t classes) {
    Architecture a = test::tiny_architecture();
    a.classes = classes;
    return a;
}

Model random_model(Stage stage, std::uint32_t classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Model m = init_model(arch_with(classes), stage, seed);
    test::randomize(m, rng);
    return m;
}

// The final layer ignores its input and always prefers `winner`.
Model constant_model(Stage stage, std::uint32_t classes, std::uint32_t winner) {
    Model m = random_model(stage, classes, 77);
    auto& last = m.classifier.layers.back();
    std::fill(last.weight.begin(), last.weight.end(), 0.0);
    std::fill(last.bias.begin(), last.bias.end(), 0.0);
    last.bias[winner] = 1.0;
    return m;
}

std::vector<Streamline> random_tractogram(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Streamline> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(test::random_streamline(rng, 5 + i % 30));
    return out;
}

TEST(Parcellate, DeepWhiteMatterIsNonSwmWithoutStageTwoLabel) {
    const auto r = parcellate(constant_model(Stage::one, 2, kDwmLabel), constant_model(Stage::two, 16, 7),
                              random_tractogram(5, 1));
    for (std::size_t i = 0; i < r.size(); ++i) {
        EXPECT_EQ(r.stage_one[i], kDwmLabel);
        EXPECT_FALSE(r.stage_two[i]);
        EXPECT_EQ(r.final_label[i], kNonSwm);
    }
}

TEST(Parcellate, OutlierClassIsNonSwm) {
    constexpr std::uint32_t k = 8;
    const auto r = parcellate(constant_model(Stage::one, 2, kSwmLabel), constant_model(Stage::two, 2 * k, k + 3),
                              random_tractogram(5, 2));
    EXPECT_EQ(r.clusters, k);
    for (std::size_t i = 0; i < r.size(); ++i) {
        ASSERT_TRUE(r.stage_two[i]);
        EXPECT_EQ(*r.stage_two[i], k + 3);
        EXPECT_EQ(r.final_label[i], kNonSwm);
    }
}

TEST(Parcellate, ClusterClassBecomesTheFinalLabel) {
    const auto r = parcellate(constant_model(Stage::one, 2, kSwmLabel), constant_model(Stage::two, 16, 7),
                              random_tractogram(5, 3));
    for (auto l : r.final_label) EXPECT_EQ(l, 7);
    const auto counts = cluster_counts(r);
    ASSERT_EQ(counts.size(), 8u);
    EXPECT_EQ(counts[7], 5u);
}

TEST(Parcellate, EmptyTractogramGivesEmptyResult) {
    const auto r = parcellate(random_model(Stage::one, 2, 1), random_model(Stage::two, 6, 2), {});
    EXPECT_EQ(r.size(), 0u);
    EXPECT_EQ(r.clusters, 3u);
}

TEST(Parcellate, ModelErrors) {
    const auto one = random_model(Stage::one, 2, 1);
    Architecture other = arch_with(6);
    other.points = 7;
    const auto mismatched = init_model(other, Stage::two, 2);
    EXPECT_THROW(parcellate(one, mismatched, random_tractogram(2, 4)), ShapeMismatchError);
    EXPECT_THROW(parcellate(one, random_model(Stage::two, 5, 3), random_tractogram(2, 4)), std::invalid_argument);
    EXPECT_THROW(parcellate(random_model(Stage::one, 3, 3), random_model(Stage::two, 6, 3), random_tractogram(2, 4)),
                 std::invalid_argument);
}

class RandomModels : public ::testing::Test {
protected:
    Model m1 = random_model(Stage::one, 2, 11);
    Model m2 = random_model(Stage::two, 8, 12);
    std::vector<Streamline> tract = random_tractogram(500, 13);
};

TEST_F(RandomModels, PartitionProperty) {
    const auto r = parcellate(m1, m2, tract);
    const auto counts = cluster_counts(r);
    const std::size_t non_swm = static_cast<std::size_t>(std::count(r.final_label.begin(), r.final_label.end(), kNonSwm));
    EXPECT_EQ(non_swm + std::accumulate(counts.begin(), counts.end(), std::size_t{0}), tract.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        EXPECT_EQ(r.stage_two[i].has_value(), r.stage_one[i] == kSwmLabel);
    }
}

TEST_F(RandomModels, ReversalStability) {
    std::vector<Streamline> rev;
    for (const auto& s : tract) rev.push_back(reversed(s));
    EXPECT_EQ(parcellate(m1, m2, tract).final_label, parcellate(m1, m2, rev).final_label);
}

TEST_F(RandomModels, IndependentOfWorkersAndBatchSize) {
    const auto base = parcellate(m1, m2, tract);
    for (std::size_t workers : {1u, 2u, 4u, 7u}) {
        for (std::size_t batch : {1u, 33u, 4096u}) {
            const auto r = parcellate(m1, m2, tract, {workers, batch});
            EXPECT_EQ(r.final_label, base.final_label) << workers << "/" << batch;
            EXPECT_EQ(r.stage_one, base.stage_one);
            EXPECT_EQ(r.stage_two, base.stage_two);
        }
    }
}

TEST_F(RandomModels, PredictLabelsMatchesDirectClassification) {
    const auto resampled = resample_all(tract, m1.arch.points);
    const auto labels = predict_labels(m2, resampled, {3, 50});
    const auto direct = predict(classify(m2.classifier, encode(m2.encoder, make_batch(resampled)).values));
    EXPECT_EQ(labels, direct);
}

TEST(Importance, CountsSumToFeatureDimension) {
    const auto m = random_model(Stage::two, 4, 5);
    const auto resampled = resample_all(random_tractogram(50, 6), m.arch.points);
    const auto counts = importance_counts(m, resampled);
    ASSERT_EQ(counts.size(), 50u);
    for (const auto& row : counts) {
        ASSERT_EQ(row.size(), m.arch.points);
        EXPECT_EQ(std::accumulate(row.begin(), row.end(), 0u), m.arch.feature_dim());
    }
    const auto profile = summarize_importance(counts, m.arch.feature_dim());
    EXPECT_NEAR(std::accumulate(profile.mean.begin(), profile.mean.end(), 0.0), 1.0, 1e-12);
    EXPECT_NEAR(profile.endpoint_share + profile.interior_share, 1.0, 1e-12);
    EXPECT_EQ(profile.endpoint_share, profile.mean.front() + profile.mean.back());
}

TEST(Importance, DegenerateStreamlineGivesAllWinsToIndexZero) {
    const auto m = random_model(Stage::two, 4, 7);
    const std::vector<Streamline> s{Streamline({{4, 5, 6}, {4, 5, 6}})};
    const auto counts = importance_counts(m, resample_all(s, m.arch.points));
    ASSERT_EQ(counts.size(), 1u);
    EXPECT_EQ(counts[0][0], m.arch.feature_dim());
    for (std::size_t i = 1; i < counts[0].size(); ++i) EXPECT_EQ(counts[0][i], 0u);
}

TEST(Importance, ProfileStatisticsMatchHandValues) {
    // Two streamlines over three points, feature dimension 4.
    const std::vector<std::vector<std::uint32_t>> counts{{4, 0, 0}, {2, 0, 2}};
    const auto p = summarize_importance(counts, 4);
    EXPECT_DOUBLE_EQ(p.mean[0], 0.75);
    EXPECT_DOUBLE_EQ(p.mean[2], 0.25);
    EXPECT_DOUBLE_EQ(p.stddev[0], 0.25);
    EXPECT_DOUBLE_EQ(p.stddev[1], 0.0);
    EXPECT_DOUBLE_EQ(p.endpoint_share, 1.0);
    EXPECT_DOUBLE_EQ(p.interior_share, 0.0);
}

TEST(Importance, PointImportanceUsesTheWholeDataset) {
    const auto m = random_model(Stage::two, 4, 8);
    LabeledDataset d;
    d.streamlines = random_tractogram(20, 9);
    d.labels.assign(20, 0);
    d.num_classes = 4;
    const auto p = point_importance(m, d);
    EXPECT_EQ(p.streamlines, 20u);
    EXPECT_EQ(p.points, m.arch.points);
    EXPECT_EQ(p.feature_dim, m.arch.feature_dim());
}

}  // namespace
}  // namespace swm
