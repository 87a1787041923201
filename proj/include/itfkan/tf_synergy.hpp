#pragma once

// Time-frequency synergy branch: patch the seasonal component, take a DFT
// across patches, re-expand every bin over the patch axis into a real
// (N, K, P, d) grid, run one small KAN per patch over the frequency axis, and
// map the patch axis back to the lookback length.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "itfkan/random.hpp"
#include "itfkan/taylor_kan.hpp"
#include "itfkan/tensor.hpp"

namespace itfkan {

struct PatchConfig {
    std::size_t length = 6;  // P
    std::size_t stride = 6;  // S

    void validate(std::size_t lookback) const {
        if (length > lookback)
            throw std::invalid_argument("patch length " + std::to_string(length) + " exceeds lookback " + std::to_string(lookback));
        if (stride < 1 || stride > length)
            throw std::invalid_argument("patch stride must satisfy 1 <= S <= P, got S=" + std::to_string(stride));
    }

    /// floor((L - P) / S) + 2
    std::size_t count(std::size_t lookback) const {
        validate(lookback);
        return (lookback - length) / stride + 2;
    }
};

inline std::size_t spectrum_bins(std::size_t patches) { return patches / 2 + 1; }

/// Raw windows (N, Pc, P*d): the series is tail-padded with S copies of its
/// last step, then cut into windows of length P at stride S.
inline Tensor patch_windows(const Tensor& seasonal, const PatchConfig& cfg) {
    if (seasonal.rank() != 3) throw ShapeError("patch: expected (N, L, d), got " + shape_str(seasonal.shape()));
    const std::size_t n = seasonal.dim(0), L = seasonal.dim(1), d = seasonal.dim(2);
    const std::size_t count = cfg.count(L);
    Tensor last = slice(seasonal, 1, L - 1, L);
    std::vector<Tensor> pieces{seasonal};
    for (std::size_t s = 0; s < cfg.stride; ++s) pieces.push_back(last);
    Tensor padded = concat(pieces, 1);
    std::vector<Tensor> windows;
    for (std::size_t p = 0; p < count; ++p) {
        const std::size_t start = p * cfg.stride;
        windows.push_back(reshape(slice(padded, 1, start, start + cfg.length), {n, 1, cfg.length * d}));
    }
    return concat(windows, 1);
}

/// Shared affine compression of each P*d window to d values.
struct PatchEncoder {
    Tensor weight;  // (P*d, d)
    Tensor bias;    // (d)

    static PatchEncoder init(std::size_t patch_len, std::size_t d, Rng& rng) {
        const double r = 1.0 / std::sqrt(static_cast<double>(patch_len * d));
        return {rng.uniform_tensor({patch_len * d, d}, -r, r), rng.uniform_tensor({d}, -r, r)};
    }
};

/// (N, L, d) -> (N, Pc, d)
inline Tensor patch(const Tensor& seasonal, const PatchConfig& cfg, const PatchEncoder& enc) {
    return add(matmul(patch_windows(seasonal, cfg), enc.weight), enc.bias);
}

struct SpectrumResult {
    Tensor amplitude;  // (N, K, d)
    Tensor phase;      // (N, K, d), in (-pi, pi]
};

namespace detail {

// Angle 2*pi*k*p/P with p running 1..P, reduced exactly so multiples of
// pi/2 produce exact zeros.
inline std::pair<double, double> twiddle(std::size_t k, std::size_t p, std::size_t P) {
    const std::size_t m = (k * p) % P;
    if (m == 0) return {1.0, 0.0};
    if (2 * m == P) return {-1.0, 0.0};
    if (4 * m == P) return {0.0, 1.0};
    if (4 * m == 3 * P) return {0.0, -1.0};
    const double ang = 2.0 * M_PI * static_cast<double>(m) / static_cast<double>(P);
    return {std::cos(ang), std::sin(ang)};
}

}  // namespace detail

/// DFT along the patch axis: F_k = sum_{p=1..P} x_p exp(-j 2 pi k p / P), k = 0..P/2.
inline SpectrumResult dft_patches(const Tensor& patches) {
    if (patches.rank() != 3) throw ShapeError("dft_patches: expected (N, P, d), got " + shape_str(patches.shape()));
    const std::size_t P = patches.dim(1);
    if (P < 2) throw std::invalid_argument("dft_patches: need at least 2 patches");
    const std::size_t K = spectrum_bins(P);
    Tensor cos_t = Tensor::zeros({P, K}), sin_t = Tensor::zeros({P, K});
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t k = 0; k < K; ++k) {
            auto [c, s] = detail::twiddle(k, p + 1, P);
            cos_t.at({p, k}) = c;
            sin_t.at({p, k}) = -s;
        }
    Tensor x = permute(patches, {0, 2, 1});  // (N, d, P)
    Tensor re = matmul(x, cos_t);
    Tensor im = matmul(x, sin_t);
    return {permute(hypot(re, im), {0, 2, 1}), permute(atan2(im, re), {0, 2, 1})};
}

/// Real time-frequency grid: out[n,k,p,c] = A[n,k,c] cos(phi[n,k,c] + 2 pi k p / P), p = 1..P.
inline Tensor tf_expand(const SpectrumResult& spec, std::size_t patches) {
    const Shape& s = spec.amplitude.shape();
    if (s.size() != 3 || spec.phase.shape() != s) throw ShapeError("tf_expand", s, spec.phase.shape());
    const std::size_t K = s[1], d = s[2];
    Tensor angle = Tensor::zeros({K, patches, d});
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t p = 0; p < patches; ++p) {
            const std::size_t m = (k * (p + 1)) % patches;
            const double a = 2.0 * M_PI * static_cast<double>(m) / static_cast<double>(patches);
            for (std::size_t c = 0; c < d; ++c) angle.at({k, p, c}) = a;
        }
    Tensor amp = repeat_axis(spec.amplitude, 2, patches);
    Tensor phase = repeat_axis(spec.phase, 2, patches);
    return mul(amp, cos(add(phase, angle)));
}

/// Inverse DFT from the one-sided grid: x_p = (1/P) sum_k w_k TF[k, p], with
/// w_k = 1 for DC (and Nyquist when P is even), 2 otherwise.
inline Tensor tf_reconstruct(const Tensor& grid) {
    if (grid.rank() != 4) throw ShapeError("tf_reconstruct: expected (N, K, P, d), got " + shape_str(grid.shape()));
    const std::size_t K = grid.dim(1), P = grid.dim(2);
    std::vector<double> w(K, 2.0);
    w[0] = 1.0;
    if (P % 2 == 0) w[K - 1] = 1.0;
    Tensor weights = Tensor::zeros({K, P, grid.dim(3)});
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t r = 0; r < P * grid.dim(3); ++r) weights.data()[k * P * grid.dim(3) + r] = w[k] / static_cast<double>(P);
    return sum_axis(mul(grid, weights), 1);
}

/// h_tf[n, p, c] = mean over output nodes of KAN_p(tf[n, :, p, c]).
inline Tensor tfkan_forward(const Tensor& tf, const std::vector<KanNetwork>& kans,
                            std::vector<std::vector<NodeRanges>>* ranges = nullptr) {
    if (tf.rank() != 4) throw ShapeError("tfkan_forward: expected (N, K, P, d), got " + shape_str(tf.shape()));
    const std::size_t n = tf.dim(0), K = tf.dim(1), P = tf.dim(2), d = tf.dim(3);
    if (kans.size() != P)
        throw ShapeError("tfkan_forward: " + std::to_string(kans.size()) + " networks for " + std::to_string(P) + " patches");
    if (ranges && ranges->size() < P) ranges->resize(P);
    Tensor by_patch = permute(tf, {2, 0, 3, 1});  // (P, N, d, K)
    std::vector<Tensor> outs;
    for (std::size_t p = 0; p < P; ++p) {
        const auto& net = kans[p];
        if (net.layers.empty() || net.layers.front().in_dim != K || net.layers.back().out_dim != K)
            throw ShapeError("tfkan_forward: KAN_" + std::to_string(p) + " must map " + std::to_string(K) + " -> " +
                             std::to_string(K));
        Tensor v = reshape(slice(by_patch, 0, p, p + 1), {n * d, K});
        Tensor y = net.forward(v, ranges ? &(*ranges)[p] : nullptr);
        outs.push_back(reshape(mean_axis(y, 1), {1, n, d}));
    }
    return permute(concat(outs, 0), {1, 0, 2});
}

/// Shared affine map along the patch axis back to the lookback length.
struct Unpatcher {
    Tensor weight;  // (Pc, L)
    Tensor bias;    // (L)

    static Unpatcher init(std::size_t patches, std::size_t L, Rng& rng) {
        const double r = 1.0 / std::sqrt(static_cast<double>(patches));
        return {rng.uniform_tensor({patches, L}, -r, r), rng.uniform_tensor({L}, -r, r)};
    }
};

/// (N, Pc, d) -> (N, d, L), time-last layout used by the model.
inline Tensor unpatch_time_last(const Tensor& h, const Unpatcher& u) {
    if (h.rank() != 3 || h.dim(1) != u.weight.dim(0)) throw ShapeError("unpatch", h.shape(), u.weight.shape());
    return add(matmul(permute(h, {0, 2, 1}), u.weight), u.bias);
}

/// (N, Pc, d) -> (N, L, d)
inline Tensor unpatch(const Tensor& h, const Unpatcher& u) { return permute(unpatch_time_last(h, u), {0, 2, 1}); }

inline std::size_t tfkan_edge_count(std::size_t lookback, const PatchConfig& cfg) {
    const auto P = cfg.count(lookback);
    const auto K = spectrum_bins(P);
    return P * K * K;
}

/// The whole branch with its parameters.
struct TfSynergy {
    PatchConfig cfg;
    std::size_t lookback = 0;
    PatchEncoder encoder;
    std::vector<KanNetwork> kans;
    Unpatcher unpatcher;

    static TfSynergy init(std::size_t L, std::size_t d, PatchConfig cfg, Rng& rng) {
        TfSynergy t;
        t.cfg = cfg;
        t.lookback = L;
        const std::size_t P = cfg.count(L), K = spectrum_bins(P);
        t.encoder = PatchEncoder::init(cfg.length, d, rng);
        for (std::size_t p = 0; p < P; ++p) t.kans.push_back(build_plain_kan({K, K}, rng));
        t.unpatcher = Unpatcher::init(P, L, rng);
        return t;
    }

    std::size_t patches() const { return kans.size(); }
    std::size_t bins() const { return spectrum_bins(kans.size()); }

    /// seasonal (N, L, d) -> (N, d, L)
    Tensor forward(const Tensor& seasonal, std::vector<std::vector<NodeRanges>>* ranges = nullptr) const {
        Tensor patched = patch(seasonal, cfg, encoder);
        Tensor grid = tf_expand(dft_patches(patched), patches());
        return unpatch_time_last(tfkan_forward(grid, kans, ranges), unpatcher);
    }

    std::vector<std::pair<std::string, Tensor>> parameters() const {
        std::vector<std::pair<std::string, Tensor>> p{{"patch.weight", encoder.weight}, {"patch.bias", encoder.bias}};
        for (std::size_t k = 0; k < kans.size(); ++k)
            for (auto& [n, t] : kans[k].parameters()) p.emplace_back("kan" + std::to_string(k) + "." + n, t);
        p.emplace_back("unpatch.weight", unpatcher.weight);
        p.emplace_back("unpatch.bias", unpatcher.bias);
        return p;
    }
};

}  // namespace itfkan
