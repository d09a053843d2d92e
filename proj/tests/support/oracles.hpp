#pragma once

// Reference implementations used as test oracles. Each is written directly
// from the defining formula, with no shared code paths into the library.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "swm/evaluation.hpp"
#include "swm/geometry.hpp"
#include "swm/matrix.hpp"
#include "swm/network.hpp"

namespace swm::test {

// ---------------------------------------------------------------------------
// Random inputs

std::vector<Point3> random_polyline(std::mt19937_64& rng, std::size_t points, double step = 2.0);
Streamline random_streamline(std::mt19937_64& rng, std::size_t points);
ResampledStreamline random_resampled(std::mt19937_64& rng, std::size_t points, double scale = 10.0);
Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0);
Matrix random_unit_rows(std::mt19937_64& rng, std::size_t rows, std::size_t cols);
/// Every trainable and statistic block filled with small random values;
/// running variances stay positive.
void randomize(Model& model, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Geometry

/// Oversamples the polyline densely and returns, for each of n evenly spaced
/// arc-length targets, the dense sample nearest in arc length.
std::vector<Point3> dense_resample(const Streamline& s, std::size_t n, std::size_t dense = 10000);
double segment_sum_length(const std::vector<Point3>& points);
double brute_mdf(const ResampledStreamline& a, const ResampledStreamline& b);

// ---------------------------------------------------------------------------
// Linear algebra and network pieces

/// Plain triple loop, k innermost.
Matrix naive_matmul(const Matrix& a, const Matrix& b);
/// y = x W^T + b for one Linear, row by row.
Matrix naive_affine(const Matrix& x, const Linear& l);
/// Eval-mode projector: two affine maps and row normalisation.
Matrix naive_project(const ProjectorParams& p, const Matrix& g);

// ---------------------------------------------------------------------------
// Losses and optimizer

double logsumexp_cross_entropy(const Matrix& logits, const std::vector<std::uint32_t>& labels);
/// The contrastive loss evaluated term by term with explicit exponentials.
double nested_loop_supcon(const Matrix& z, const std::vector<std::uint32_t>& labels, double tau);

struct AdamOracle {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m;
    std::vector<double> v;
    int t = 0;
    void step(std::vector<double>& params, const std::vector<double>& grads, double lr);
};

// ---------------------------------------------------------------------------
// Metrics

/// F1 per class via an explicit k x k confusion matrix.
std::vector<double> confusion_f1(const std::vector<std::uint32_t>& pred, const std::vector<std::uint32_t>& truth,
                                 std::size_t k);
double brute_cda(const std::vector<ResampledStreamline>& subject, const std::vector<ResampledStreamline>& atlas);
std::optional<double> direct_ispv(const std::vector<double>& counts);
/// Occupied voxel indices after rasterising each point with floor().
std::vector<std::size_t> rasterize(const std::vector<ResampledStreamline>& streamlines, const GridSpec& grid);

// ---------------------------------------------------------------------------
// Finite differences

/// max over elements of |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Central difference of f at values[i] with step h; values is restored.
double central_difference(std::span<double> values, std::size_t i, double h, const std::function<double()>& f);

}  // namespace swm::test
