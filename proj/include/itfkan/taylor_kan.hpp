#pragma once

// Taylor-parameterized KAN layers.
//
// Every edge (input i -> output j) carries phi(x) = w * (silu(x) + a0 + a1 x + a2 x^2).
// A layer keeps its edges as dense (J, I) parameter grids so the forward pass
// reduces to three matrix products:
//
//   out = silu(X) W^T + X (W*A1)^T + X^2 (W*A2)^T + rowsum(W*A0)
//
// A first layer may additionally host injected symbolic edges. Those occupy
// grid slots of their own; the Taylor edge in an occupied slot is fixed to zero
// and excluded from the adjustable edge count.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "itfkan/random.hpp"
#include "itfkan/tensor.hpp"

namespace itfkan {

inline constexpr int kTaylorOrder = 2;

// ---------------------------------------------------------------------------
// Single edges

struct TaylorEdge {
    Tensor coeffs;  // (3): a0, a1, a2
    Tensor weight;  // scalar w
};

inline Tensor taylor_edge_eval(const Tensor& x, const TaylorEdge& edge) {
    if (edge.coeffs.numel() != kTaylorOrder + 1) throw ShapeError("taylor_edge_eval: expected 3 coefficients");
    auto coeff = [&](std::size_t o) { return reshape(slice(edge.coeffs, 0, o, o + 1), {}); };
    Tensor poly = add(add(coeff(0), mul(coeff(1), x)), mul(coeff(2), square(x)));
    return mul(reshape(edge.weight, {}), add(silu(x), poly));
}

/// Mean of squared non-constant Taylor coefficients: (a1^2 + a2^2) / 2.
inline double edge_l2_norm(const TaylorEdge& edge) {
    auto a = edge.coeffs.data();
    return (a[1] * a[1] + a[2] * a[2]) / kTaylorOrder;
}

/// m0 + m1 x + ... + mp x^p
struct TrendInjectEdge {
    std::vector<double> m;

    std::size_t degree() const { return m.empty() ? 0 : m.size() - 1; }

    double eval(double x) const {
        double acc = 0.0;
        for (std::size_t k = m.size(); k-- > 0;) acc = acc * x + m[k];
        return acc;
    }
};

inline double edge_l2_norm(const TrendInjectEdge& edge) {
    if (edge.degree() == 0) return 0.0;
    double s = 0.0;
    for (std::size_t k = 1; k < edge.m.size(); ++k) s += edge.m[k] * edge.m[k];
    return s / static_cast<double>(edge.degree());
}

/// a0/2 + sum_k a_k cos(f_k pi x) + b_k sin(f_k pi x)
struct SeasonalInjectEdge {
    std::vector<double> freqs;
    double a0 = 0.0;
    std::vector<double> a;
    std::vector<double> b;

    double eval(double x) const {
        double acc = a0 / 2.0;
        for (std::size_t k = 0; k < freqs.size(); ++k) {
            const double u = freqs[k] * M_PI * x;
            acc += a[k] * std::cos(u) + b[k] * std::sin(u);
        }
        return acc;
    }
};

inline double edge_l2_norm(const SeasonalInjectEdge& edge) {
    if (edge.a.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < edge.a.size(); ++k) s += edge.a[k] * edge.a[k] + edge.b[k] * edge.b[k];
    return s / static_cast<double>(2 * edge.a.size());
}

// ---------------------------------------------------------------------------
// Injections hosted by a first layer

/// Per input node i, the monomial term m[i,k] x^k feeds output k-1 (k = 1..p);
/// the constant m[i,0] rides on the k = 1 slot.
struct TrendInjection {
    std::size_t degree = 0;
    Tensor m;  // (I, p + 1)

    std::size_t output_of(std::size_t k) const { return k - 1; }
    std::size_t edges_per_node() const { return degree; }
};

/// Per input node i, the Fourier term of frequency f_k feeds output `outputs[k]`
/// (the spectral bin of f_k); the a0/2 offset rides on the first term's slot.
struct SeasonalInjection {
    std::vector<double> freqs;
    std::vector<std::size_t> outputs;
    Tensor a0;  // (I)
    Tensor a;   // (I, K)
    Tensor b;   // (I, K)

    std::size_t edges_per_node() const { return freqs.size(); }
};

// ---------------------------------------------------------------------------
// Layer

struct TaylorKanLayer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Tensor weight;  // (J, I)
    Tensor a0, a1, a2;
    Tensor mask;                 // (J, I), 1 = live Taylor edge
    std::vector<char> fixed;     // (J, I), slot held by an injected edge
    std::optional<TrendInjection> trend;
    std::optional<SeasonalInjection> seasonal;

    static TaylorKanLayer init(std::size_t in, std::size_t out, Rng& rng) {
        if (in == 0 || out == 0) throw std::invalid_argument("TaylorKanLayer: dimensions must be positive");
        TaylorKanLayer l;
        l.in_dim = in;
        l.out_dim = out;
        const double ra = 0.1 / std::sqrt(static_cast<double>(in));
        const double rw = 1.0 / std::sqrt(static_cast<double>(in));
        l.weight = rng.uniform_tensor({out, in}, -rw, rw);
        l.a0 = rng.uniform_tensor({out, in}, -ra, ra);
        l.a1 = rng.uniform_tensor({out, in}, -ra, ra);
        l.a2 = rng.uniform_tensor({out, in}, -ra, ra);
        l.mask = Tensor::full({out, in}, 1.0);
        l.fixed.assign(in * out, 0);
        return l;
    }

    std::size_t slot(std::size_t j, std::size_t i) const { return j * in_dim + i; }
    bool has_injection() const { return trend.has_value() || seasonal.has_value(); }

    std::size_t total_edges() const { return in_dim * out_dim; }
    std::size_t fixed_edges() const { return static_cast<std::size_t>(std::count(fixed.begin(), fixed.end(), 1)); }
    std::size_t adjustable_edges() const { return total_edges() - fixed_edges(); }
    std::size_t injected_edges() const {
        std::size_t per = trend ? trend->edges_per_node() : seasonal ? seasonal->edges_per_node() : 0;
        return per * in_dim;
    }
    bool is_active(std::size_t j, std::size_t i) const { return mask.data()[slot(j, i)] != 0.0; }

    TaylorEdge edge(std::size_t j, std::size_t i) const {
        const auto s = slot(j, i);
        return {Tensor::vector({a0.data()[s], a1.data()[s], a2.data()[s]}), Tensor::scalar(weight.data()[s])};
    }

    TrendInjectEdge trend_edge(std::size_t i) const {
        TrendInjectEdge e;
        const auto w = trend->degree + 1;
        e.m.assign(trend->m.data().begin() + static_cast<std::ptrdiff_t>(i * w),
                   trend->m.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * w));
        return e;
    }

    SeasonalInjectEdge seasonal_edge(std::size_t i) const {
        const auto& s = *seasonal;
        const auto K = s.freqs.size();
        SeasonalInjectEdge e{s.freqs, s.a0.data()[i], {}, {}};
        for (std::size_t k = 0; k < K; ++k) {
            e.a.push_back(s.a.data()[i * K + k]);
            e.b.push_back(s.b.data()[i * K + k]);
        }
        return e;
    }

    /// Zero the Taylor edge at (j, i) and take it out of the live set.
    void disable(std::size_t j, std::size_t i) {
        const auto s = slot(j, i);
        weight.data()[s] = a0.data()[s] = a1.data()[s] = a2.data()[s] = 0.0;
        mask.data()[s] = 0.0;
    }

    void occupy(std::size_t j, std::size_t i) {
        if (j >= out_dim) throw std::invalid_argument("injected edge targets output " + std::to_string(j) + " of " + std::to_string(out_dim));
        if (fixed[slot(j, i)]) throw std::invalid_argument("injected edges collide at a grid slot");
        fixed[slot(j, i)] = 1;
        disable(j, i);
    }

    void attach_trend(std::size_t degree, Rng& rng) {
        if (degree == 0) throw std::invalid_argument("TrendInject degree must be >= 1");
        if (degree > out_dim) throw std::invalid_argument("TrendInject degree exceeds layer output width");
        trend = TrendInjection{degree, rng.uniform_tensor({in_dim, degree + 1}, -0.1, 0.1)};
        for (std::size_t i = 0; i < in_dim; ++i)
            for (std::size_t k = 1; k <= degree; ++k) occupy(trend->output_of(k), i);
    }

    void attach_seasonal(std::vector<double> freqs, std::vector<std::size_t> outputs, Rng& rng) {
        if (freqs.empty() || freqs.size() != outputs.size())
            throw std::invalid_argument("SeasonalInject needs one output slot per frequency");
        const auto K = freqs.size();
        seasonal = SeasonalInjection{std::move(freqs), std::move(outputs), rng.uniform_tensor({in_dim}, -0.1, 0.1),
                                     rng.uniform_tensor({in_dim, K}, -0.1, 0.1),
                                     rng.uniform_tensor({in_dim, K}, -0.1, 0.1)};
        for (std::size_t i = 0; i < in_dim; ++i)
            for (auto j : seasonal->outputs) occupy(j, i);
    }

    /// Trainable tensors with stable names.
    std::vector<std::pair<std::string, Tensor>> parameters() const {
        std::vector<std::pair<std::string, Tensor>> p{{"weight", weight}, {"a0", a0}, {"a1", a1}, {"a2", a2}};
        if (trend) p.emplace_back("inject.m", trend->m);
        if (seasonal) {
            p.emplace_back("inject.a0", seasonal->a0);
            p.emplace_back("inject.a", seasonal->a);
            p.emplace_back("inject.b", seasonal->b);
        }
        return p;
    }
};

namespace detail {

// (1, J) row with a single 1 at column j.
inline Tensor one_hot_row(std::size_t j, std::size_t width) {
    Tensor t = Tensor::zeros({1, width});
    t.data()[j] = 1.0;
    return t;
}

inline Tensor column(const Tensor& m, std::size_t k) { return slice(m, 1, k, k + 1); }

}  // namespace detail

/// x: (..., I) -> (..., J); leading axes are batch axes.
inline Tensor layer_forward(const Tensor& x, const TaylorKanLayer& layer) {
    if (x.rank() == 0 || x.shape().back() != layer.in_dim)
        throw ShapeError("layer_forward: last axis of " + shape_str(x.shape()) + " must equal in_dim " +
                         std::to_string(layer.in_dim));
    Shape out_shape = x.shape();
    out_shape.back() = layer.out_dim;
    const std::size_t rows = x.numel() / layer.in_dim;
    Tensor x2d = reshape(x, {rows, layer.in_dim});
    Tensor xsq = square(x2d);

    Tensor w = mul(layer.weight, layer.mask);
    Tensor out = matmul(silu(x2d), transpose(w));
    out = add(out, matmul(x2d, transpose(mul(w, layer.a1))));
    out = add(out, matmul(xsq, transpose(mul(w, layer.a2))));
    out = add(out, sum_axis(mul(w, layer.a0), 1));

    const std::size_t J = layer.out_dim;
    if (layer.trend) {
        const auto& t = *layer.trend;
        Tensor power = x2d;
        for (std::size_t k = 1; k <= t.degree; ++k) {
            if (k > 1) power = k == 2 ? xsq : mul(power, x2d);
            Tensor term = matmul(power, detail::column(t.m, k));  // (rows, 1)
            out = add(out, matmul(term, detail::one_hot_row(t.output_of(k), J)));
        }
        Tensor constant = reshape(sum(detail::column(t.m, 0)), {1, 1});
        out = add(out, reshape(matmul(constant, detail::one_hot_row(t.output_of(1), J)), {J}));
    }
    if (layer.seasonal) {
        const auto& s = *layer.seasonal;
        for (std::size_t k = 0; k < s.freqs.size(); ++k) {
            Tensor u = scale(x2d, s.freqs[k] * M_PI);
            Tensor term = add(matmul(cos(u), detail::column(s.a, k)), matmul(sin(u), detail::column(s.b, k)));
            out = add(out, matmul(term, detail::one_hot_row(s.outputs[k], J)));
        }
        Tensor offset = reshape(scale(sum(s.a0), 0.5), {1, 1});
        out = add(out, reshape(matmul(offset, detail::one_hot_row(s.outputs[0], J)), {J}));
    }
    return reshape(out, std::move(out_shape));
}

// ---------------------------------------------------------------------------
// Network

/// Per-node observed input range, accumulated over calibration passes.
struct NodeRanges {
    std::vector<double> lo, hi;

    void observe(const Tensor& x) {
        const std::size_t width = x.shape().back();
        if (lo.empty()) {
            lo.assign(width, INFINITY);
            hi.assign(width, -INFINITY);
        }
        auto v = x.data();
        for (std::size_t r = 0; r < v.size(); ++r) {
            const auto i = r % width;
            lo[i] = std::min(lo[i], v[r]);
            hi[i] = std::max(hi[i], v[r]);
        }
    }
};

struct KanNetwork {
    std::vector<TaylorKanLayer> layers;

    std::size_t depth() const { return layers.size(); }

    void validate() const {
        for (std::size_t k = 0; k < layers.size(); ++k) {
            if (k > 0 && layers[k].has_injection())
                throw std::invalid_argument("KanNetwork: injected edges are only allowed in the first layer");
            if (k + 1 < layers.size() && layers[k].out_dim != layers[k + 1].in_dim)
                throw std::invalid_argument("KanNetwork: layer " + std::to_string(k) + " output does not chain");
        }
    }

    /// ranges, when given, receives the input range of every layer's nodes.
    Tensor forward(Tensor x, std::vector<NodeRanges>* ranges = nullptr) const {
        if (ranges && ranges->size() < layers.size()) ranges->resize(layers.size());
        for (std::size_t k = 0; k < layers.size(); ++k) {
            if (ranges) (*ranges)[k].observe(x);
            x = layer_forward(x, layers[k]);
        }
        return x;
    }

    std::vector<std::pair<std::string, Tensor>> parameters() const {
        std::vector<std::pair<std::string, Tensor>> p;
        for (std::size_t k = 0; k < layers.size(); ++k)
            for (auto& [n, t] : layers[k].parameters()) p.emplace_back("l" + std::to_string(k) + "." + n, t);
        return p;
    }
};

inline KanNetwork build_plain_kan(const std::vector<std::size_t>& widths, Rng& rng) {
    if (widths.size() < 2) throw std::invalid_argument("build_plain_kan: need at least two widths");
    KanNetwork net;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) net.layers.push_back(TaylorKanLayer::init(widths[k], widths[k + 1], rng));
    return net;
}

/// Two-layer L -> hidden -> L network whose first layer hosts TrendInject.
inline KanNetwork build_trend_kan(std::size_t L, std::size_t hidden, std::size_t degree, Rng& rng) {
    KanNetwork net = build_plain_kan({L, hidden, L}, rng);
    net.layers[0].attach_trend(degree, rng);
    net.validate();
    return net;
}

/// Two-layer L -> hidden -> L network whose first layer hosts SeasonalInject
/// at the given normalized frequencies; `bins` are their spectral indices.
inline KanNetwork build_seasonal_kan(std::size_t L, std::size_t hidden, const std::vector<double>& freqs,
                                     const std::vector<std::size_t>& bins, Rng& rng) {
    KanNetwork net = build_plain_kan({L, hidden, L}, rng);
    net.layers[0].attach_seasonal(freqs, bins, rng);
    net.validate();
    return net;
}

// ---------------------------------------------------------------------------
// Norms and sparsification loss

/// (J * I) norms of the Taylor edges, row-major by output.
inline std::vector<double> taylor_edge_norms(const TaylorKanLayer& layer) {
    std::vector<double> n(layer.total_edges());
    auto a1 = layer.a1.data(), a2 = layer.a2.data();
    for (std::size_t s = 0; s < n.size(); ++s) n[s] = (a1[s] * a1[s] + a2[s] * a2[s]) / kTaylorOrder;
    return n;
}

/// Norm of each input node's injected edge (empty without injection).
inline std::vector<double> injected_edge_norms(const TaylorKanLayer& layer) {
    std::vector<double> n;
    for (std::size_t i = 0; i < layer.in_dim; ++i) {
        if (layer.trend) n.push_back(edge_l2_norm(layer.trend_edge(i)));
        if (layer.seasonal) n.push_back(edge_l2_norm(layer.seasonal_edge(i)));
    }
    return n;
}

inline Tensor layer_reg_loss(const TaylorKanLayer& layer) {
    Tensor r = scale(sum(mul(add(square(layer.a1), square(layer.a2)), layer.mask)), 1.0 / kTaylorOrder);
    if (layer.trend) {
        const auto& t = *layer.trend;
        r = add(r, scale(sum(square(slice(t.m, 1, 1, t.degree + 1))), 1.0 / static_cast<double>(t.degree)));
    }
    if (layer.seasonal) {
        const auto& s = *layer.seasonal;
        r = add(r, scale(add(sum(square(s.a)), sum(square(s.b))), 1.0 / static_cast<double>(2 * s.freqs.size())));
    }
    return r;
}

/// Sum of edge norms over every Taylor and injected edge of every layer.
inline Tensor reg_loss(const KanNetwork& net) {
    Tensor r = Tensor::scalar(0.0);
    for (const auto& l : net.layers) r = add(r, layer_reg_loss(l));
    return r;
}

// ---------------------------------------------------------------------------
// Frequency extraction for SeasonalInject

struct FrequencySelection {
    std::vector<std::size_t> bins;  // spectral indices, strongest first
    std::vector<double> freqs;      // 2 * bin / L
    std::vector<double> amplitude;  // mean amplitude per bin 0..L/2
};

/// Averages |DFT| along `time_axis` over every other axis, drops DC, and
/// returns the K strongest bins (ties go to the lower bin).
inline FrequencySelection top_k_frequencies(const Tensor& seasonal, std::size_t time_axis, std::size_t K) {
    const Shape& s = seasonal.shape();
    if (time_axis >= s.size()) throw ShapeError("top_k_frequencies: time axis out of range for " + shape_str(s));
    const std::size_t L = s[time_axis];
    const std::size_t bins = L / 2;
    if (K == 0 || K > bins)
        throw std::invalid_argument("top_k_frequencies: K=" + std::to_string(K) + " but only " + std::to_string(bins) +
                                    " non-DC bins exist for length " + std::to_string(L));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < time_axis; ++i) outer *= s[i];
    for (std::size_t i = time_axis + 1; i < s.size(); ++i) inner *= s[i];

    std::vector<double> ctab(L * (bins + 1)), stab(L * (bins + 1));
    for (std::size_t k = 0; k <= bins; ++k)
        for (std::size_t t = 0; t < L; ++t) {
            const double ang = 2.0 * M_PI * static_cast<double>((k * t) % L) / static_cast<double>(L);
            ctab[k * L + t] = std::cos(ang);
            stab[k * L + t] = std::sin(ang);
        }

    std::vector<double> amp(bins + 1, 0.0);
    std::vector<double> series(L);
    auto v = seasonal.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t c = 0; c < inner; ++c) {
            for (std::size_t t = 0; t < L; ++t) series[t] = v[(o * L + t) * inner + c];
            for (std::size_t k = 0; k <= bins; ++k) {
                double re = 0.0, im = 0.0;
                for (std::size_t t = 0; t < L; ++t) {
                    re += series[t] * ctab[k * L + t];
                    im -= series[t] * stab[k * L + t];
                }
                amp[k] += std::hypot(re, im);
            }
        }
    for (auto& a : amp) a /= static_cast<double>(outer * inner);

    // Spectra of (numerically) flat series are rounding noise; treat them as ties.
    const double peak = *std::max_element(amp.begin() + 1, amp.end());
    const double floor = 1e-12 * std::max(1.0, amp[0]);
    std::vector<double> key(amp);
    if (peak <= floor) std::fill(key.begin(), key.end(), 0.0);

    std::vector<std::size_t> order;
    for (std::size_t k = 1; k <= bins; ++k) order.push_back(k);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return key[x] > key[y]; });
    FrequencySelection sel;
    sel.amplitude = amp;
    for (std::size_t k = 0; k < K; ++k) {
        sel.bins.push_back(order[k]);
        sel.freqs.push_back(2.0 * static_cast<double>(order[k]) / static_cast<double>(L));
    }
    return sel;
}

}  // namespace itfkan
