#pragma once

#include <cstdint>
#include <span>

#include "swm/matrix.hpp"

namespace swm {

struct LossResult {
    double loss = 0.0;
    Matrix gradient;  // same shape as the loss input
};

/// Mean over the batch of -log softmax(logits)[label]. Gradient with respect
/// to the logits is (softmax - onehot) / batch. Throws std::invalid_argument
/// on an out-of-range label.
LossResult cross_entropy_loss(const Matrix& logits, std::span<const std::uint32_t> labels);

/// Supervised contrastive loss over unit-norm rows of `z`:
///
///   L = sum_i  -1/|P(i)| sum_{p in P(i)} log( exp(z_i.z_p / tau) / sum_{a != i} exp(z_i.z_a / tau) )
///
/// where P(i) holds the other items sharing i's label. Items without a
/// positive contribute zero. Throws std::invalid_argument when tau <= 0, the
/// batch has fewer than two rows, or a row is not unit length within 1e-6.
LossResult supcon_loss(const Matrix& z, std::span<const std::uint32_t> labels, double temperature);

}  // namespace swm
