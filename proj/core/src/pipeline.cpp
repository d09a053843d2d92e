#include "swm/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace swm {

namespace {

// Runs `work(first, last)` over [0, count) in fixed-size slices. Slices are
// claimed dynamically but each writes only its own output range, so results
// do not depend on the worker count.
template <class Work>
void parallel_slices(std::size_t count, std::size_t slice, std::size_t workers, Work&& work) {
    slice = std::max<std::size_t>(slice, 1);
    const std::size_t slices = (count + slice - 1) / slice;
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(slices, 1));
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (std::size_t s = next++; s < slices; s = next++) {
            const std::size_t first = s * slice;
            work(first, std::min(count, first + slice));
        }
    };
    if (workers == 1) {
        run();
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
}

}  // namespace

std::vector<std::uint32_t> predict_labels(const Model& model, std::span<const ResampledStreamline> streamlines,
                                          const InferenceOptions& options) {
    std::vector<std::uint32_t> out(streamlines.size());
    parallel_slices(streamlines.size(), options.batch_size, options.workers, [&](std::size_t first, std::size_t last) {
        const PointBatch batch = make_batch(streamlines.subspan(first, last - first));
        const GlobalFeatures g = encode(model.encoder, batch);
        const auto labels = predict(classify(model.classifier, g.values));
        std::copy(labels.begin(), labels.end(), out.begin() + static_cast<std::ptrdiff_t>(first));
    });
    return out;
}

ParcellationResult parcellate(const Model& stage_one, const Model& stage_two, std::span<const Streamline> tractogram,
                              const InferenceOptions& options) {
    if (stage_one.arch.points != stage_two.arch.points) {
        throw ShapeMismatchError("parcellate: models use different point counts (" +
                                    std::to_string(stage_one.arch.points) + " vs " +
                                    std::to_string(stage_two.arch.points) + ")");
    }
    if (stage_one.classifier.classes() != 2) throw std::invalid_argument("parcellate: stage-one model must have 2 classes");
    const std::size_t classes = stage_two.classifier.classes();
    if (classes < 2 || classes % 2 != 0) {
        throw std::invalid_argument("parcellate: stage-two model must have 2K classes");
    }

    ParcellationResult result;
    result.clusters = classes / 2;
    const std::size_t count = tractogram.size();
    result.stage_one.assign(count, kDwmLabel);
    result.stage_two.assign(count, std::nullopt);
    result.final_label.assign(count, kNonSwm);
    if (count == 0) return result;

    const std::size_t n = stage_one.arch.points;
    std::vector<ResampledStreamline> resampled(count);
    parallel_slices(count, options.batch_size, options.workers, [&](std::size_t first, std::size_t last) {
        for (std::size_t i = first; i < last; ++i) resampled[i] = resample(tractogram[i], n);
    });

    result.stage_one = predict_labels(stage_one, resampled, options);

    std::vector<std::size_t> swm;
    for (std::size_t i = 0; i < count; ++i) {
        if (result.stage_one[i] == kSwmLabel) swm.push_back(i);
    }
    std::vector<ResampledStreamline> kept;
    kept.reserve(swm.size());
    for (std::size_t i : swm) kept.push_back(std::move(resampled[i]));
    const auto second = predict_labels(stage_two, kept, options);
    for (std::size_t j = 0; j < swm.size(); ++j) {
        const std::size_t i = swm[j];
        result.stage_two[i] = second[j];
        result.final_label[i] = second[j] < result.clusters ? static_cast<std::int32_t>(second[j]) : kNonSwm;
    }
    return result;
}

std::vector<std::size_t> cluster_counts(const ParcellationResult& result) {
    std::vector<std::size_t> counts(result.clusters, 0);
    for (auto label : result.final_label) {
        if (label >= 0 && static_cast<std::size_t>(label) < result.clusters) ++counts[static_cast<std::size_t>(label)];
    }
    return counts;
}

std::vector<std::vector<std::uint32_t>> importance_counts(const Model& model,
                                                          std::span<const ResampledStreamline> streamlines) {
    std::vector<std::vector<std::uint32_t>> counts;
    if (streamlines.empty()) return counts;
    const PointBatch batch = make_batch(streamlines);
    const GlobalFeatures g = encode(model.encoder, batch);
    const std::size_t dim = g.values.cols();
    counts.assign(streamlines.size(), std::vector<std::uint32_t>(batch.points, 0));
    for (std::size_t s = 0; s < streamlines.size(); ++s) {
        for (std::size_t c = 0; c < dim; ++c) ++counts[s][g.argmax[s * dim + c]];
    }
    return counts;
}

ImportanceProfile summarize_importance(const std::vector<std::vector<std::uint32_t>>& counts, std::size_t feature_dim) {
    ImportanceProfile profile;
    profile.feature_dim = feature_dim;
    profile.streamlines = counts.size();
    if (counts.empty()) return profile;
    const std::size_t n = counts.front().size();
    profile.points = n;
    profile.mean.assign(n, 0.0);
    profile.stddev.assign(n, 0.0);
    const double dim = static_cast<double>(feature_dim);
    const double total = static_cast<double>(counts.size());
    for (const auto& row : counts) {
        for (std::size_t i = 0; i < n; ++i) profile.mean[i] += static_cast<double>(row[i]) / dim;
    }
    for (auto& m : profile.mean) m /= total;
    for (const auto& row : counts) {
        for (std::size_t i = 0; i < n; ++i) {
            const double d = static_cast<double>(row[i]) / dim - profile.mean[i];
            profile.stddev[i] += d * d;
        }
    }
    for (auto& s : profile.stddev) s = std::sqrt(s / total);
    profile.endpoint_share = n == 1 ? profile.mean[0] : profile.mean[0] + profile.mean[n - 1];
    profile.interior_share = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) profile.interior_share += profile.mean[i];
    return profile;
}

ImportanceProfile point_importance(const Model& model, const LabeledDataset& data) {
    if (data.size() == 0) throw std::invalid_argument("point_importance: empty dataset");
    const auto resampled = resample_all(data.streamlines, model.arch.points);
    return summarize_importance(importance_counts(model, resampled), model.arch.feature_dim());
}

}  // namespace swm
