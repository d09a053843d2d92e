#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "swm/network.hpp"

namespace swm {

/// Which operations are counted. One multiply-accumulate is 2 FLOPs;
/// normalisation is a scale and a shift (2 per activation); ReLU is one
/// comparison per activation; max-pooling is n - 1 comparisons per pooled
/// dimension. Softmax is not counted since prediction uses the raw logits.
struct FlopsConvention {
    bool bias = true;
    bool normalization = true;
    bool activation = true;
    bool pooling = true;
};

struct LayerFlops {
    std::string name;
    std::uint64_t multiply_accumulate = 0;  // already doubled
    std::uint64_t bias = 0;
    std::uint64_t normalization = 0;
    std::uint64_t activation = 0;
    std::uint64_t pooling = 0;

    std::uint64_t total() const { return multiply_accumulate + bias + normalization + activation + pooling; }
};

struct FlopsReport {
    std::vector<LayerFlops> layers;
    std::uint64_t encoder = 0;
    std::uint64_t classifier = 0;
    std::uint64_t total = 0;
};

/// FLOPs of one streamline's inference pass through encoder and classifier.
FlopsReport count_flops(const Architecture& arch, const FlopsConvention& convention = {});

}  // namespace swm
