#include "swm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace swm {

namespace {

void mean_and_stddev(std::span<const double> values, double& mean, double& stddev) {
    mean = 0.0;
    stddev = 0.0;
    if (values.empty()) return;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    for (double v : values) stddev += (v - mean) * (v - mean);
    stddev = std::sqrt(stddev / static_cast<double>(values.size()));
}

}  // namespace

double accuracy(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("accuracy: lengths differ");
    if (predicted.empty()) throw std::invalid_argument("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

F1Report macro_f1(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth, std::size_t k) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("macro_f1: lengths differ");
    std::vector<std::size_t> tp(k, 0), fp(k, 0), fn(k, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (predicted[i] >= k || truth[i] >= k) throw std::invalid_argument("macro_f1: label outside [0, k)");
        if (predicted[i] == truth[i]) {
            ++tp[truth[i]];
        } else {
            ++fp[predicted[i]];
            ++fn[truth[i]];
        }
    }
    F1Report report;
    report.per_class.resize(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        // 2PR / (P + R) = 2TP / (2TP + FP + FN)
        const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
        report.per_class[c] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    }
    mean_and_stddev(report.per_class, report.mean, report.stddev);
    return report;
}

double cluster_identification_rate(std::span<const std::size_t> counts, std::size_t threshold,
                                   std::optional<std::span<const std::size_t>> subset) {
    if (threshold < 1) throw std::invalid_argument("cluster_identification_rate: threshold must be at least 1");
    std::size_t considered = 0;
    std::size_t detected = 0;
    auto visit = [&](std::size_t c) {
        if (c >= counts.size()) throw std::invalid_argument("cluster_identification_rate: cluster id out of range");
        ++considered;
        detected += counts[c] >= threshold;
    };
    if (subset) {
        for (std::size_t c : *subset) visit(c);
    } else {
        for (std::size_t c = 0; c < counts.size(); ++c) visit(c);
    }
    return considered == 0 ? 0.0 : static_cast<double>(detected) / static_cast<double>(considered);
}

CdaReport cluster_distance_to_atlas(const std::vector<std::vector<ResampledStreamline>>& subject,
                                    const std::vector<std::vector<ResampledStreamline>>& atlas) {
    if (subject.size() != atlas.size()) throw std::invalid_argument("cluster_distance_to_atlas: cluster counts differ");
    CdaReport report;
    report.per_cluster.resize(subject.size());
    std::vector<double> values;
    for (std::size_t c = 0; c < subject.size(); ++c) {
        if (subject[c].empty()) continue;
        if (atlas[c].empty()) {
            report.warnings.push_back("cluster " + std::to_string(c) + ": atlas cluster is empty, skipped");
            continue;
        }
        double sum = 0.0;
        for (const auto& s : subject[c]) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& a : atlas[c]) best = std::min(best, mdf_distance(s, a));
            sum += best;
        }
        const double cda = sum / static_cast<double>(subject[c].size());
        report.per_cluster[c] = cda;
        values.push_back(cda);
    }
    report.identified = values.size();
    mean_and_stddev(values, report.mean, report.stddev);
    return report;
}

std::vector<std::optional<double>> inter_subject_variability(const std::vector<std::vector<std::size_t>>& counts) {
    if (counts.size() < 2) throw std::invalid_argument("inter_subject_variability: needs at least 2 subjects");
    const std::size_t clusters = counts.front().size();
    for (const auto& row : counts) {
        if (row.size() != clusters) throw std::invalid_argument("inter_subject_variability: ragged count table");
    }
    std::vector<std::optional<double>> out(clusters);
    std::vector<double> column(counts.size());
    for (std::size_t c = 0; c < clusters; ++c) {
        for (std::size_t s = 0; s < counts.size(); ++s) column[s] = static_cast<double>(counts[s][c]);
        double mean = 0.0;
        double stddev = 0.0;
        mean_and_stddev(column, mean, stddev);
        if (mean > 0.0) out[c] = stddev / mean;
    }
    return out;
}

std::optional<std::size_t> GridSpec::index_of(const Point3& p) const {
    std::array<std::size_t, 3> idx{};
    for (int d = 0; d < 3; ++d) {
        const double v = std::floor((p[d] - origin[d]) / voxel_size);
        if (!(v >= 0.0) || v >= static_cast<double>(dims[d])) return std::nullopt;
        idx[d] = static_cast<std::size_t>(v);
    }
    return idx[0] + std::size_t{dims[0]} * (idx[1] + std::size_t{dims[1]} * idx[2]);
}

GridSpec bounding_grid(std::span<const ResampledStreamline> streamlines, double voxel_size, double padding) {
    if (!(voxel_size > 0.0)) throw std::invalid_argument("bounding_grid: voxel size must be positive");
    Point3 lo{0.0, 0.0, 0.0};
    Point3 hi{0.0, 0.0, 0.0};
    bool any = false;
    for (const auto& s : streamlines) {
        for (const auto& p : s.points()) {
            for (int d = 0; d < 3; ++d) {
                lo[d] = any ? std::min(lo[d], p[d]) : p[d];
                hi[d] = any ? std::max(hi[d], p[d]) : p[d];
            }
            any = true;
        }
    }
    GridSpec grid;
    grid.voxel_size = voxel_size;
    for (int d = 0; d < 3; ++d) {
        grid.origin[d] = std::floor((lo[d] - padding) / voxel_size) * voxel_size;
        const double extent = hi[d] + padding - grid.origin[d];
        grid.dims[d] = static_cast<std::uint32_t>(std::max(1.0, std::floor(extent / voxel_size) + 1.0));
    }
    return grid;
}

namespace {

GridSpec extend_grid(const GridSpec& grid, const std::vector<std::vector<ResampledStreamline>>& subjects) {
    std::array<long long, 3> lo{0, 0, 0};
    std::array<long long, 3> hi{};
    for (int d = 0; d < 3; ++d) hi[d] = static_cast<long long>(grid.dims[d]) - 1;
    for (const auto& streamlines : subjects) {
        for (const auto& s : streamlines) {
            for (const auto& p : s.points()) {
                for (int d = 0; d < 3; ++d) {
                    const auto v = static_cast<long long>(std::floor((p[d] - grid.origin[d]) / grid.voxel_size));
                    lo[d] = std::min(lo[d], v);
                    hi[d] = std::max(hi[d], v);
                }
            }
        }
    }
    GridSpec out = grid;
    for (int d = 0; d < 3; ++d) {
        out.origin[d] = grid.origin[d] + static_cast<double>(lo[d]) * grid.voxel_size;
        out.dims[d] = static_cast<std::uint32_t>(hi[d] - lo[d] + 1);
    }
    return out;
}

}  // namespace

Heatmap population_heatmap(const std::vector<std::vector<ResampledStreamline>>& subjects, GridSpec grid,
                           OutOfGridPolicy policy) {
    if (!(grid.voxel_size > 0.0)) throw std::invalid_argument("population_heatmap: voxel size must be positive");
    if (policy == OutOfGridPolicy::extend) grid = extend_grid(grid, subjects);

    Heatmap map;
    map.grid = grid;
    map.values.assign(grid.voxels(), 0.0);
    if (subjects.empty()) return map;

    std::vector<std::size_t> hits(grid.voxels(), 0);
    std::vector<bool> touched(grid.voxels(), false);
    std::vector<std::size_t> touched_list;
    for (const auto& streamlines : subjects) {
        touched_list.clear();
        for (const auto& s : streamlines) {
            for (const auto& p : s.points()) {
                const auto idx = grid.index_of(p);
                if (!idx) throw std::out_of_range("population_heatmap: streamline point outside the grid");
                if (!touched[*idx]) {
                    touched[*idx] = true;
                    touched_list.push_back(*idx);
                }
            }
        }
        for (std::size_t idx : touched_list) {
            ++hits[idx];
            touched[idx] = false;
        }
    }
    const double subjects_count = static_cast<double>(subjects.size());
    for (std::size_t v = 0; v < hits.size(); ++v) map.values[v] = static_cast<double>(hits[v]) / subjects_count;
    return map;
}

std::optional<double> weighted_dice(const Heatmap& a, const Heatmap& b) {
    if (!(a.grid == b.grid) || a.values.size() != b.values.size()) {
        throw std::invalid_argument("weighted_dice: heatmaps are on different grids");
    }
    double overlap = 0.0;
    double total = 0.0;
    for (std::size_t v = 0; v < a.values.size(); ++v) {
        overlap += std::min(a.values[v], b.values[v]);
        total += a.values[v] + b.values[v];
    }
    if (!(total > 0.0)) return std::nullopt;
    return 2.0 * overlap / total;
}

}  // namespace swm
