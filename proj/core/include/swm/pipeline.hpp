#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "swm/dataset.hpp"
#include "swm/errors.hpp"
#include "swm/geometry.hpp"
#include "swm/network.hpp"

namespace swm {

/// Final label of a streamline that is deep white matter or an outlier.
inline constexpr std::int32_t kNonSwm = -1;

/// Stage-one class ids.
inline constexpr std::uint32_t kDwmLabel = 0;
inline constexpr std::uint32_t kSwmLabel = 1;

struct ParcellationResult {
    std::size_t clusters = 0;                               // K
    std::vector<std::uint32_t> stage_one;                   // kSwmLabel or kDwmLabel
    std::vector<std::optional<std::uint32_t>> stage_two;    // absent when filtered at stage one
    std::vector<std::int32_t> final_label;                  // cluster id in [0, K) or kNonSwm

    std::size_t size() const { return final_label.size(); }
};

struct InferenceOptions {
    std::size_t workers = 1;
    std::size_t batch_size = 4096;  // streamlines handed to a worker at once
};

/// Eval-mode class predictions. Independent of workers and batch size.
std::vector<std::uint32_t> predict_labels(const Model& model, std::span<const ResampledStreamline> streamlines,
                                          const InferenceOptions& options = {});

/// Two-stage inference: stage one filters deep white matter, stage two
/// assigns a cluster or an outlier class; outliers become kNonSwm.
/// Throws ShapeMismatchError when the models disagree on the point count and
/// std::invalid_argument when the stage-two model has an odd class count.
ParcellationResult parcellate(const Model& stage_one, const Model& stage_two, std::span<const Streamline> tractogram,
                              const InferenceOptions& options = {});

/// Streamline count per cluster id in [0, K).
std::vector<std::size_t> cluster_counts(const ParcellationResult& result);

/// Per-point-index max-pool win statistics.
struct ImportanceProfile {
    std::size_t points = 0;
    std::size_t streamlines = 0;
    std::size_t feature_dim = 0;
    std::vector<double> mean;    // normalised by feature_dim, sums to 1
    std::vector<double> stddev;  // population standard deviation across streamlines
    double endpoint_share = 0.0;  // mean[0] + mean[n - 1]
    double interior_share = 0.0;
};

/// For each streamline, how many pooled dimensions each point index wins.
/// Every row sums to the feature dimension.
std::vector<std::vector<std::uint32_t>> importance_counts(const Model& model,
                                                          std::span<const ResampledStreamline> streamlines);

ImportanceProfile point_importance(const Model& model, const LabeledDataset& data);
ImportanceProfile summarize_importance(const std::vector<std::vector<std::uint32_t>>& counts, std::size_t feature_dim);

}  // namespace swm
