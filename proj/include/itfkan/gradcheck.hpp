#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "itfkan/tensor.hpp"

namespace itfkan {

namespace detail {

inline double relative_gap(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

inline double eval_scalar(const std::function<Tensor()>& f) {
    NoGradGuard guard;
    const double v = f().item();
    if (!std::isfinite(v)) throw std::domain_error("gradient_check: function value is not finite");
    return v;
}

}  // namespace detail

/// Max over every coordinate of every tensor in `params` of
/// |analytic - central difference| / max(1, |analytic|).
/// `loss` must rebuild the graph from the current parameter values.
inline double gradient_check(const std::function<Tensor()>& loss, std::vector<Tensor> params, double eps = 1e-5) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("gradient_check: eps must be positive");
    for (auto& p : params) {
        p.set_requires_grad(true);
        p.clear_grad();
    }
    Tensor out = loss();
    if (!std::isfinite(out.item())) throw std::domain_error("gradient_check: function value is not finite");
    backward(out);

    double worst = 0.0;
    for (auto& p : params) {
        std::vector<double> analytic(p.numel(), 0.0);
        if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
        auto values = p.data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + eps;
            const double up = detail::eval_scalar(loss);
            values[i] = saved - eps;
            const double down = detail::eval_scalar(loss);
            values[i] = saved;
            worst = std::max(worst, detail::relative_gap(analytic[i], (up - down) / (2.0 * eps)));
        }
        p.clear_grad();
    }
    return worst;
}

/// Single-input form: checks d f(x) / dx.
inline double gradient_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps = 1e-5) {
    return gradient_check([&f, x] { return f(x); }, std::vector<Tensor>{x}, eps);
}

}  // namespace itfkan
