#include "swm/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace swm {

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               OptimizerState& state, double learning_rate, const AdamSettings& settings) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter and gradient counts differ");
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.size(), 0.0);
            state.second_moment.emplace_back(p.size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) throw std::invalid_argument("adam_step: state has a different block count");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(settings.beta1, t);
    const double correction2 = 1.0 - std::pow(settings.beta2, t);

    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b];
        const auto g = grads[b];
        auto& m = state.first_moment[b];
        auto& v = state.second_moment[b];
        if (p.size() != g.size() || p.size() != m.size()) throw std::invalid_argument("adam_step: block shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = settings.beta1 * m[i] + (1.0 - settings.beta1) * g[i];
            v[i] = settings.beta2 * v[i] + (1.0 - settings.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            p[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + settings.epsilon);
        }
    }
}

}  // namespace swm
