#pragma once

// Affine embedding of raw series and moving-average trend/seasonal split.

#include <cmath>
#include <stdexcept>

#include "itfkan/random.hpp"
#include "itfkan/tensor.hpp"

namespace itfkan {

/// Shared scalar -> d affine map applied to every (variate, time) point.
struct Embedding {
    Tensor weight;  // (1, d)
    Tensor bias;    // (d)

    static Embedding init(std::size_t d, Rng& rng) {
        if (d == 0) throw std::invalid_argument("Embedding: width must be >= 1");
        return {rng.uniform_tensor({1, d}, -1.0, 1.0), rng.uniform_tensor({d}, -1.0, 1.0)};
    }

    std::size_t width() const { return bias.numel(); }
};

/// (N, L) -> (N, L, d)
inline Tensor embed(const Tensor& x, const Embedding& e) {
    if (x.rank() != 2 || x.numel() == 0)
        throw ShapeError("embed: expected a non-empty (N, L) series, got " + shape_str(x.shape()));
    const auto n = x.dim(0), l = x.dim(1);
    return add(matmul(reshape(x, {n, l, 1}), e.weight), e.bias);
}

struct Decomposition {
    Tensor trend;
    Tensor seasonal;
    std::size_t kernel;
};

/// Trend is the edge-replicated moving average along time (axis 1 of
/// (N, L, d)); seasonal is the remainder, so trend + seasonal == x.
inline Decomposition moving_average_decompose(const Tensor& x, std::size_t kernel) {
    if (x.rank() != 3) throw ShapeError("moving_average_decompose: expected (N, L, d), got " + shape_str(x.shape()));
    if (kernel % 2 == 0) throw std::invalid_argument("moving_average_decompose: kernel must be odd");
    Tensor trend = moving_average(x, 1, kernel);
    return {trend, sub(x, trend), kernel};
}

}  // namespace itfkan
