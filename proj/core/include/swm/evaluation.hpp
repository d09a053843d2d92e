#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swm/geometry.hpp"

namespace swm {

/// Fraction of matching entries. Throws std::invalid_argument on empty or
/// unequal-length input.
double accuracy(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth);

struct F1Report {
    std::vector<double> per_class;
    double mean = 0.0;    // unweighted over all k classes
    double stddev = 0.0;  // population standard deviation over classes
};

/// Per-class F1 = 2PR / (P + R); a class with no true and no predicted
/// members (0/0) scores 0. Labels outside [0, k) are rejected.
F1Report macro_f1(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth, std::size_t k);

/// Fraction of clusters holding at least `threshold` streamlines, optionally
/// restricted to `subset` (cluster ids).
double cluster_identification_rate(std::span<const std::size_t> counts, std::size_t threshold = 10,
                                   std::optional<std::span<const std::size_t>> subset = std::nullopt);

struct CdaReport {
    std::vector<std::optional<double>> per_cluster;  // absent when either side is empty
    double mean = 0.0;                               // over clusters with a value
    double stddev = 0.0;
    std::size_t identified = 0;
    std::vector<std::string> warnings;
};

/// Mean over subject streamlines of the minimum MDF distance to the atlas
/// streamlines of the same cluster. Both arguments are indexed by cluster id
/// and must have the same length.
CdaReport cluster_distance_to_atlas(const std::vector<std::vector<ResampledStreamline>>& subject,
                                    const std::vector<std::vector<ResampledStreamline>>& atlas);

/// Coefficient of variation (population standard deviation / mean) of each
/// cluster's streamline count across subjects. `counts[s][c]` is subject s,
/// cluster c. Clusters with mean zero have no value. Needs two subjects.
std::vector<std::optional<double>> inter_subject_variability(const std::vector<std::vector<std::size_t>>& counts);

/// Axis-aligned voxel grid in millimetres.
struct GridSpec {
    Point3 origin{0.0, 0.0, 0.0};
    double voxel_size = 2.0;
    std::array<std::uint32_t, 3> dims{1, 1, 1};

    std::size_t voxels() const { return std::size_t{dims[0]} * dims[1] * dims[2]; }
    /// Flat index (x fastest) or nullopt when p lies outside the grid.
    std::optional<std::size_t> index_of(const Point3& p) const;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct Heatmap {
    GridSpec grid;
    std::vector<double> values;  // grid.voxels() entries in [0, 1]
};

enum class OutOfGridPolicy { error, extend };

/// Bounding box of all points padded by `padding` mm, snapped to whole voxels.
GridSpec bounding_grid(std::span<const ResampledStreamline> streamlines, double voxel_size = 2.0,
                       double padding = 4.0);

/// Fraction of subjects with at least one streamline point in each voxel.
/// `subjects[s]` holds subject s's streamlines of one cluster. A point
/// outside the grid either raises std::out_of_range or grows the grid in
/// whole voxels, keeping the original voxel lattice.
Heatmap population_heatmap(const std::vector<std::vector<ResampledStreamline>>& subjects, GridSpec grid,
                           OutOfGridPolicy policy = OutOfGridPolicy::error);

/// 2 * sum(min(a, b)) / (sum(a) + sum(b)); absent when both maps are zero.
/// Throws std::invalid_argument when the grids differ.
std::optional<double> weighted_dice(const Heatmap& a, const Heatmap& b);

}  // namespace swm
