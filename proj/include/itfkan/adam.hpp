#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "itfkan/tensor.hpp"

namespace itfkan {

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    explicit AdamState(double lr = 1e-3) : learning_rate(lr) {}
};

/// One bias-corrected Adam update over `params`; gradients are cleared afterwards.
inline void adam_step(std::vector<Tensor>& params, AdamState& state) {
    for (std::size_t k = 0; k < params.size(); ++k)
        if (!params[k].has_grad()) throw std::logic_error("adam_step: parameter " + std::to_string(k) + " has no gradient");

    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.numel(), 0.0);
            state.second_moment.emplace_back(p.numel(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) throw std::logic_error("adam_step: parameter list changed");

    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& m = state.first_moment[k];
        auto& v = state.second_moment[k];
        if (m.size() != params[k].numel()) throw std::logic_error("adam_step: moment shape mismatch");
        auto values = params[k].data();
        auto grad = params[k].grad();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            values[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
        params[k].clear_grad();
    }
}

}  // namespace itfkan
