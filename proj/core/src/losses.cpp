#include "swm/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace swm {

LossResult cross_entropy_loss(const Matrix& logits, std::span<const std::uint32_t> labels) {
    const std::size_t batch = logits.rows();
    const std::size_t k = logits.cols();
    if (labels.size() != batch) throw std::invalid_argument("cross_entropy_loss: label count differs from batch");
    if (batch == 0) throw std::invalid_argument("cross_entropy_loss: empty batch");

    LossResult out;
    out.gradient.resize(batch, k);
    const double inv_batch = 1.0 / static_cast<double>(batch);
    double total = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
        if (labels[r] >= k) {
            throw std::invalid_argument("cross_entropy_loss: label " + std::to_string(labels[r]) + " outside [0, " +
                                        std::to_string(k) + ")");
        }
        const auto row = logits.row(r);
        const double peak = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double v : row) sum += std::exp(v - peak);
        const double log_sum = peak + std::log(sum);
        total += log_sum - row[labels[r]];
        auto g = out.gradient.row(r);
        for (std::size_t c = 0; c < k; ++c) g[c] = std::exp(row[c] - log_sum) * inv_batch;
        g[labels[r]] -= inv_batch;
    }
    out.loss = total * inv_batch;
    return out;
}

LossResult supcon_loss(const Matrix& z, std::span<const std::uint32_t> labels, double temperature) {
    const std::size_t batch = z.rows();
    if (!(temperature > 0.0)) throw std::invalid_argument("supcon_loss: temperature must be positive");
    if (batch < 2) throw std::invalid_argument("supcon_loss: batch needs at least 2 items");
    if (labels.size() != batch) throw std::invalid_argument("supcon_loss: label count differs from batch");
    for (std::size_t r = 0; r < batch; ++r) {
        double sq = 0.0;
        for (double v : z.row(r)) sq += v * v;
        if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
            throw std::invalid_argument("supcon_loss: row " + std::to_string(r) + " is not unit length");
        }
    }

    // Pairwise logits s_ij = z_i . z_j / tau.
    Matrix logits = matmul_transposed(z, z);
    for (double& v : logits.values()) v /= temperature;

    // coeff(i, j) = dL_i / ds_ij = softmax_i(j) - [j in P(i)] / |P(i)|, zero when P(i) is empty.
    Matrix coeff(batch, batch);
    double total = 0.0;
    std::vector<double> prob(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        std::size_t positives = 0;
        for (std::size_t j = 0; j < batch; ++j) {
            if (j != i && labels[j] == labels[i]) ++positives;
        }
        if (positives == 0) continue;

        const auto row = logits.row(i);
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < batch; ++j) {
            if (j != i) peak = std::max(peak, row[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < batch; ++j) {
            if (j != i) sum += std::exp(row[j] - peak);
        }
        const double log_denominator = peak + std::log(sum);

        const double weight = 1.0 / static_cast<double>(positives);
        double positive_sum = 0.0;
        auto c = coeff.row(i);
        for (std::size_t j = 0; j < batch; ++j) {
            if (j == i) continue;
            c[j] = std::exp(row[j] - log_denominator);
            if (labels[j] == labels[i]) {
                positive_sum += row[j] - log_denominator;
                c[j] -= weight;
            }
        }
        total -= weight * positive_sum;
    }

    // dL/dz = (C + C^T) z / tau
    Matrix sym(batch, batch);
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < batch; ++j) sym(i, j) = (coeff(i, j) + coeff(j, i)) / temperature;
    }
    LossResult out;
    out.loss = total;
    out.gradient = matmul(sym, z);
    return out;
}

}  // namespace swm
