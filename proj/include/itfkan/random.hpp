#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "itfkan/tensor.hpp"

namespace itfkan {

/// Seeded generator with library-independent uniform draws, so a seed fixes
/// every initialization and shuffle bit-for-bit.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::size_t index(std::size_t n) {
        // rejection sampling keeps the draw unbiased
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do r = engine_();
        while (r >= limit);
        return static_cast<std::size_t>(r % n);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

    Tensor uniform_tensor(Shape shape, double lo, double hi, bool requires_grad = true) {
        std::vector<double> v(shape_numel(shape));
        for (auto& x : v) x = uniform(lo, hi);
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace itfkan
