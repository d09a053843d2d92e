#include "swm/dataset.hpp"

#include <stdexcept>
#include <string>

namespace swm {

void LabeledDataset::validate() const {
    if (labels.size() != streamlines.size()) {
        throw std::invalid_argument("dataset: " + std::to_string(streamlines.size()) + " streamlines but " +
                                    std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes) {
            throw std::invalid_argument("dataset: label " + std::to_string(labels[i]) + " of item " + std::to_string(i) +
                                        " outside [0, " + std::to_string(num_classes) + ")");
        }
        if (!(streamline_length(streamlines[i]) > 0.0)) {
            throw std::invalid_argument("dataset: item " + std::to_string(i) + " has zero length");
        }
    }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
    LabeledDataset out;
    out.num_classes = num_classes;
    out.streamlines.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        out.streamlines.push_back(streamlines.at(i));
        out.labels.push_back(labels.at(i));
    }
    return out;
}

std::vector<std::size_t> class_counts(std::span<const std::uint32_t> labels, std::uint32_t num_classes) {
    std::vector<std::size_t> counts(num_classes, 0);
    for (auto l : labels) {
        if (l < num_classes) ++counts[l];
    }
    return counts;
}

std::vector<ResampledStreamline> resample_all(std::span<const Streamline> streamlines, std::size_t n) {
    std::vector<ResampledStreamline> out;
    out.reserve(streamlines.size());
    for (const auto& s : streamlines) out.push_back(resample(s, n));
    return out;
}

}  // namespace swm
