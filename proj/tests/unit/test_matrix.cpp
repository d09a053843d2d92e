#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "swm/matrix.hpp"

namespace swm {
namespace {

// Shapes straddle the kernel's 8-row tiles, 24-column panels and 256-deep
// blocks so every ragged path runs.
const std::vector<std::array<std::size_t, 3>> kShapes{
    {1, 1, 1}, {3, 5, 7}, {8, 24, 256}, {9, 25, 257}, {17, 50, 3}, {130, 7, 600}, {600, 70, 31},
};

TEST(Matmul, MatchesTripleLoop) {
    std::mt19937_64 rng(1);
    for (const auto& [m, k, n] : kShapes) {
        const Matrix a = test::random_matrix(rng, m, k);
        const Matrix b = test::random_matrix(rng, k, n);
        const Matrix c = matmul(a, b);
        const Matrix ref = test::naive_matmul(a, b);
        for (std::size_t i = 0; i < c.size(); ++i) {
            EXPECT_NEAR(c.values()[i], ref.values()[i], 1e-12 * static_cast<double>(k)) << m << "x" << k << "x" << n;
        }
    }
}

TEST(Matmul, TransposedVariantsAgreeBitExactly) {
    std::mt19937_64 rng(2);
    for (const auto& [m, k, n] : kShapes) {
        const Matrix a = test::random_matrix(rng, m, k);
        const Matrix b = test::random_matrix(rng, k, n);
        const Matrix c = matmul(a, b);
        EXPECT_EQ(transposed_matmul(transpose(a), b), c);
        EXPECT_EQ(matmul_transposed(a, transpose(b)), c);
    }
}

TEST(Matmul, RowResultIndependentOfOtherRows) {
    std::mt19937_64 rng(3);
    const Matrix a = test::random_matrix(rng, 77, 300);
    const Matrix b = test::random_matrix(rng, 300, 40);
    const Matrix full = matmul(a, b);
    for (std::size_t r : {0u, 8u, 39u, 76u}) {
        Matrix one(1, 300);
        std::copy(a.row(r).begin(), a.row(r).end(), one.row(0).begin());
        const Matrix c = matmul(one, b);
        for (std::size_t j = 0; j < 40; ++j) EXPECT_EQ(c(0, j), full(r, j));
    }
}

TEST(Matmul, ZeroDepthGivesZeros) {
    const Matrix a(4, 0);
    const Matrix b(0, 5);
    const Matrix c = matmul(a, b);
    ASSERT_EQ(c.rows(), 4u);
    ASSERT_EQ(c.cols(), 5u);
    for (double v : c.values()) EXPECT_EQ(v, 0.0);
}

}  // namespace
}  // namespace swm
