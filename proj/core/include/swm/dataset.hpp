#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "swm/geometry.hpp"

namespace swm {

/// Streamlines with integer class labels in [0, num_classes).
struct LabeledDataset {
    std::vector<Streamline> streamlines;
    std::vector<std::uint32_t> labels;
    std::uint32_t num_classes = 0;

    std::size_t size() const { return streamlines.size(); }

    /// Throws std::invalid_argument on a label/streamline count mismatch, an
    /// out-of-range label, or a zero-length streamline.
    void validate() const;

    LabeledDataset subset(std::span<const std::size_t> indices) const;

    friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

std::vector<std::size_t> class_counts(std::span<const std::uint32_t> labels, std::uint32_t num_classes);

std::vector<ResampledStreamline> resample_all(std::span<const Streamline> streamlines, std::size_t n);

}  // namespace swm
