#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "swm/network.hpp"

namespace swm {

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moments, one vector per parameter block, plus the step
/// counter used for bias correction.
struct OptimizerState {
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam update without weight decay. The state is sized
/// lazily on the first call; afterwards block shapes must stay the same.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               OptimizerState& state, double learning_rate, const AdamSettings& settings = {});

/// Trainable blocks (weights, biases, gamma, beta) in a fixed order.
template <class Params>
std::vector<std::span<double>> trainable_blocks(Params& params) {
    std::vector<std::span<double>> out;
    for_each_block(params, "", [&](const auto&, const auto&, std::span<double> values, bool trainable) {
        if (trainable) out.push_back(values);
    });
    return out;
}

template <class Params>
std::vector<std::span<const double>> trainable_blocks(const Params& params) {
    std::vector<std::span<const double>> out;
    for (auto s : trainable_blocks(const_cast<Params&>(params))) out.emplace_back(s);
    return out;
}

}  // namespace swm
