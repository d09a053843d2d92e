#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "swm/geometry.hpp"

namespace swm {
namespace {

ResampledStreamline translated(const ResampledStreamline& s, const Point3& t) {
    std::vector<Point3> out(s.points().begin(), s.points().end());
    for (auto& p : out) {
        for (int d = 0; d < 3; ++d) p[d] += t[d];
    }
    return ResampledStreamline(std::move(out));
}

TEST(Streamline, RejectsFewerThanTwoPoints) {
    EXPECT_THROW(Streamline(std::vector<Point3>{{0, 0, 0}}), std::invalid_argument);
    EXPECT_THROW(Streamline(std::vector<Point3>{}), std::invalid_argument);
}

TEST(Streamline, RejectsNonFiniteCoordinates) {
    EXPECT_THROW(Streamline({{0, 0, 0}, {NAN, 0, 0}}), std::invalid_argument);
    EXPECT_THROW(Streamline({{0, 0, 0}, {0, INFINITY, 0}}), std::invalid_argument);
}

TEST(Resample, StraightSegmentGivesUnitSpacing) {
    const auto r = resample(Streamline({{0, 0, 0}, {14, 0, 0}}), 15);
    ASSERT_EQ(r.size(), 15u);
    for (std::size_t i = 0; i < 15; ++i) {
        EXPECT_DOUBLE_EQ(r[i][0], static_cast<double>(i));
        EXPECT_EQ(r[i][1], 0.0);
        EXPECT_EQ(r[i][2], 0.0);
    }
}

TEST(Resample, LShapedPolyline) {
    const auto r = resample(Streamline({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}}), 5);
    const std::vector<Point3> expected{{0, 0, 0}, {0.5, 0, 0}, {1, 0, 0}, {1, 0.5, 0}, {1, 1, 0}};
    for (std::size_t i = 0; i < 5; ++i) {
        for (int d = 0; d < 3; ++d) EXPECT_NEAR(r[i][d], expected[i][d], 1e-15) << i << "," << d;
    }
}

TEST(Resample, ZeroLengthStreamlineRepeatsItsLocation) {
    const auto r = resample(Streamline({{3, 4, 5}, {3, 4, 5}, {3, 4, 5}}), 7);
    ASSERT_EQ(r.size(), 7u);
    for (const auto& p : r.points()) EXPECT_EQ(p, (Point3{3, 4, 5}));
}

TEST(Resample, RejectsFewerThanTwoTargets) {
    EXPECT_THROW(resample(Streamline({{0, 0, 0}, {1, 0, 0}}), 1), std::invalid_argument);
}

TEST(Resample, EndpointsPreservedExactly) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = test::random_streamline(rng, 3 + trial % 40);
        const auto r = resample(s, 15);
        EXPECT_EQ(r[0], s[0]);
        EXPECT_EQ(r[14], s[s.size() - 1]);
    }
}

TEST(Resample, MatchesDenseInterpolationOracle) {
    std::mt19937_64 rng(5);
    const auto s = test::random_streamline(rng, 40);
    const auto r = resample(s, 15);
    const auto oracle = test::dense_resample(s, 15, 10000);
    // The oracle snaps to the nearest dense sample; spacing bounds the gap.
    const double tolerance = streamline_length(s) / 10000.0 * 2.0;
    for (std::size_t i = 0; i < 15; ++i) {
        EXPECT_LE(distance(r[i], oracle[i]), tolerance) << "point " << i;
    }
}

TEST(Resample, ConsecutivePointsEquidistantAlongPolyline) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const auto s = test::random_streamline(rng, 40);
        const auto r = resample(s, 15);
        // Arc length of each output point, measured along the input polyline.
        const double total = streamline_length(s);
        const auto oracle = test::dense_resample(s, 15, 20000);
        for (std::size_t i = 0; i < 15; ++i) {
            EXPECT_LE(distance(r[i], oracle[i]), 2.0 * total / 20000.0);
        }
    }
}

TEST(Resample, ReversalEquivariance) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = test::random_streamline(rng, 2 + trial % 50);
        const auto a = resample(reversed(s), 15);
        const auto b = reversed(resample(s, 15));
        for (std::size_t i = 0; i < 15; ++i) EXPECT_LE(distance(a[i], b[i]), 1e-9);
    }
}

TEST(ReflectBilateral, FlipsTheRightCoordinate) {
    const auto r = reflect_bilateral(ResampledStreamline({{10, 5, 5}}));
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0], (Point3{-10, 5, 5}));
}

TEST(ReflectBilateral, MidsagittalStreamlineIsFixed) {
    const ResampledStreamline s({{0, 1, 2}, {0, 3, 4}, {0, -5, 6}});
    const auto r = reflect_bilateral(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(r[i][1], s[i][1]);
        EXPECT_EQ(r[i][2], s[i][2]);
        EXPECT_EQ(r[i][0], 0.0);
    }
}

TEST(ReflectBilateral, InvolutionAndIsometry) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = test::random_resampled(rng, 15);
        const auto r = reflect_bilateral(s);
        EXPECT_EQ(reflect_bilateral(r), s);
        for (std::size_t i = 0; i < 15; ++i) {
            for (std::size_t j = i + 1; j < 15; ++j) {
                const double d = distance(s[i], s[j]);
                EXPECT_LE(std::abs(distance(r[i], r[j]) - d), 1e-12 * std::max(1.0, d));
            }
        }
    }
}

TEST(Mdf, TrivialCases) {
    std::mt19937_64 rng(9);
    const auto a = test::random_resampled(rng, 15);
    EXPECT_EQ(mdf_distance(a, a), 0.0);
    EXPECT_EQ(mdf_distance(a, reversed(a)), 0.0);
    EXPECT_NEAR(mdf_distance(a, translated(a, {3, 0, 0})), 3.0, 1e-12);
}

TEST(Mdf, RejectsMismatchedPointCounts) {
    std::mt19937_64 rng(10);
    EXPECT_THROW(mdf_distance(test::random_resampled(rng, 15), test::random_resampled(rng, 14)),
                 std::invalid_argument);
}

TEST(Mdf, MatchesBruteForceAndIsSymmetric) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 500; ++trial) {
        const auto a = test::random_resampled(rng, 15);
        const auto b = test::random_resampled(rng, 15);
        const double d = mdf_distance(a, b);
        EXPECT_NEAR(d, test::brute_mdf(a, b), 1e-12);
        EXPECT_EQ(d, mdf_distance(b, a));
        EXPECT_GE(d, 0.0);
    }
}

TEST(Mdf, SharedTranslationInvariance) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = test::random_resampled(rng, 15);
        const auto b = test::random_resampled(rng, 15);
        const Point3 t{u(rng), u(rng), u(rng)};
        EXPECT_NEAR(mdf_distance(translated(a, t), translated(b, t)), mdf_distance(a, b), 1e-9);
    }
}

TEST(StreamlineLength, Examples) {
    EXPECT_EQ(streamline_length(Streamline({{0, 0, 0}, {0, 0, 5}})), 5.0);
    EXPECT_EQ(streamline_length(Streamline({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}})), 0.0);
}

TEST(StreamlineLength, MatchesPerSegmentOracle) {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = test::random_polyline(rng, 2 + trial);
        EXPECT_NEAR(streamline_length(Streamline(p)), test::segment_sum_length(p), 1e-9);
    }
}

}  // namespace
}  // namespace swm
