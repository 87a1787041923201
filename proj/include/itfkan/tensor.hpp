#pragma once

// Dense 64-bit tensor with a record-on-execute reverse-mode tape.
//
// A Tensor is a shared handle to a node. Copying the handle aliases the node;
// use clone() for an independent copy. Every primitive that sees an input with
// requires_grad (while grad mode is on) records a backward closure on its
// output node, so the graph is the DAG reachable from any output.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace itfkan {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
    if (s.size() == 1) os << ',';
    os << ')';
    return os.str();
}

class ShapeError : public std::invalid_argument {
public:
    ShapeError(const std::string& op, const Shape& a, const Shape& b)
        : std::invalid_argument(op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b)) {}
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until touched by backward
    bool requires_grad = false;
    bool retain_grad = false;
    std::string op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads self.grad and accumulates into inputs' grads.
    std::function<void(Node& self)> backward;

    bool is_leaf() const { return !backward; }

    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace detail

/// Disables tape recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

class Tensor {
public:
    Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
        : node_(std::make_shared<detail::Node>()) {
        if (shape_numel(shape) != data.size())
            throw ShapeError("tensor: shape " + shape_str(shape) + " needs " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(data.size()));
        node_->shape = std::move(shape);
        node_->value = std::move(data);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }
    static Tensor full(Shape shape, double v, bool requires_grad = false) {
        auto n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, v), requires_grad);
    }
    static Tensor scalar(double v, bool requires_grad = false) {
        return Tensor(Shape{}, {v}, requires_grad);
    }
    static Tensor vector(std::vector<double> v, bool requires_grad = false) {
        Shape s{v.size()};
        return Tensor(std::move(s), std::move(v), requires_grad);
    }

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->value.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }

    std::span<const double> data() const { return node_->value; }
    std::span<double> data() { return node_->value; }
    const std::vector<double>& values() const { return node_->value; }

    double item() const {
        if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
        return node_->value[0];
    }

    double at(std::initializer_list<std::size_t> idx) const { return node_->value[offset(idx)]; }
    double& at(std::initializer_list<std::size_t> idx) { return node_->value[offset(idx)]; }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool on = true) {
        node_->requires_grad = on;
        return *this;
    }
    /// Keep this non-leaf tensor's gradient after backward.
    Tensor& retain_grad() {
        node_->retain_grad = true;
        return *this;
    }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> grad_mut() { return node_->grad_buffer(); }
    void clear_grad() { node_->grad.clear(); }

    /// Deep copy of the values as a fresh leaf.
    Tensor clone() const { return Tensor(shape(), node_->value, requires_grad()); }
    /// Fresh leaf sharing nothing with the tape.
    Tensor detach() const { return Tensor(shape(), node_->value, false); }

    const std::string& op_name() const { return node_->op; }
    bool same_node(const Tensor& other) const { return node_ == other.node_; }

    // Tape plumbing used by primitives.
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != rank()) throw ShapeError("at: index rank does not match " + shape_str(shape()));
        std::size_t off = 0, k = 0;
        for (auto i : idx) {
            if (i >= node_->shape[k]) throw std::out_of_range("at: index out of range");
            off = off * node_->shape[k] + i;
            ++k;
        }
        return off;
    }

    std::shared_ptr<detail::Node> node_;
};

namespace detail {

inline bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (!grad_mode()) return false;
    for (auto* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

inline bool should_record(const std::vector<Tensor>& inputs) {
    if (!grad_mode()) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
}

inline Tensor make_result(Shape shape, std::vector<double> value) {
    return Tensor(std::move(shape), std::move(value), false);
}

template <class Backward>
void attach(Tensor& out, const char* op, std::vector<Tensor> inputs, Backward&& fn) {
    auto& n = *out.node();
    n.op = op;
    n.requires_grad = true;
    for (auto& t : inputs) n.inputs.push_back(t.node());
    n.backward = std::forward<Backward>(fn);
}

// Gradient accumulators that skip inputs not needing gradients.
inline std::vector<double>* grad_of(Node& self, std::size_t k) {
    auto& in = *self.inputs[k];
    return in.requires_grad ? &in.grad_buffer() : nullptr;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops. Broadcasting is restricted to leading axes: the
// smaller operand's shape must be a suffix of the larger one (a rank-0 scalar
// is a suffix of everything).

namespace detail {

inline bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

template <class F, class Da, class Db>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, Da da, Db db) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    Shape out_shape;
    if (sa == sb || is_suffix(sb, sa))
        out_shape = sa;
    else if (is_suffix(sa, sb))
        out_shape = sb;
    else
        throw ShapeError(op, sa, sb);

    const std::size_t n = shape_numel(out_shape);
    const std::size_t na = a.numel(), nb = b.numel();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    std::vector<double> out(n);
    if (na == n && nb == n) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(pa[i], pb[i]);
    } else {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(pa[i % na], pb[i % nb]);
    }
    Tensor r = make_result(out_shape, std::move(out));
    if (should_record({&a, &b})) {
        attach(r, op, {a, b}, [na, nb, da, db](Node& self) {
            const auto& g = self.grad;
            const auto& va = self.inputs[0]->value;
            const auto& vb = self.inputs[1]->value;
            auto* ga = grad_of(self, 0);
            auto* gb = grad_of(self, 1);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double x = va[i % na], y = vb[i % nb];
                if (ga) (*ga)[i % na] += g[i] * da(x, y);
                if (gb) (*gb)[i % nb] += g[i] * db(x, y);
            }
        });
    }
    return r;
}

template <class F, class D>
Tensor unary(const char* op, const Tensor& a, F f, D d) {
    const auto& va = a.values();
    std::vector<double> out(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) out[i] = f(va[i]);
    Tensor r = make_result(a.shape(), std::move(out));
    if (should_record({&a})) {
        attach(r, op, {a}, [d](Node& self) {
            auto* ga = grad_of(self, 0);
            if (!ga) return;
            const auto& x = self.inputs[0]->value;
            const auto& y = self.value;
            for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += self.grad[i] * d(x[i], y[i]);
        });
    }
    return r;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "div", a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

/// a / b with 0 wherever b == 0 (value and both gradients).
inline Tensor div_or_zero(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "div_or_zero", a, b, [](double x, double y) { return y == 0.0 ? 0.0 : x / y; },
        [](double, double y) { return y == 0.0 ? 0.0 : 1.0 / y; },
        [](double x, double y) { return y == 0.0 ? 0.0 : -x / (y * y); });
}

/// Amplitude sqrt(re² + im²); zero-gradient at exactly zero amplitude.
inline Tensor hypot(const Tensor& re, const Tensor& im) {
    return detail::binary(
        "hypot", re, im, [](double x, double y) { return std::hypot(x, y); },
        [](double x, double y) {
            const double r = std::hypot(x, y);
            return r == 0.0 ? 0.0 : x / r;
        },
        [](double x, double y) {
            const double r = std::hypot(x, y);
            return r == 0.0 ? 0.0 : y / r;
        });
}

/// Phase atan2(im, re) folded into (-pi, pi]; atan2(0, 0) is 0 with zero gradient.
inline Tensor atan2(const Tensor& im, const Tensor& re) {
    return detail::binary(
        "atan2", im, re,
        [](double y, double x) {
            if (x == 0.0 && y == 0.0) return 0.0;
            const double p = std::atan2(y, x);
            return p == -M_PI ? M_PI : p;
        },
        [](double y, double x) {
            const double r2 = x * x + y * y;
            return r2 == 0.0 ? 0.0 : x / r2;
        },
        [](double y, double x) {
            const double r2 = x * x + y * y;
            return r2 == 0.0 ? 0.0 : -y / r2;
        });
}

inline Tensor neg(const Tensor& a) {
    return detail::unary("neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

inline Tensor scale(const Tensor& a, double s) {
    return detail::unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& a, double s) {
    return detail::unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

inline Tensor pow_int(const Tensor& a, int n) {
    if (n < 0) throw std::invalid_argument("pow_int: exponent must be nonnegative");
    auto ipow = [](double x, int k) {
        double r = 1.0;
        for (int i = 0; i < k; ++i) r *= x;
        return r;
    };
    return detail::unary(
        "pow_int", a, [n, ipow](double x) { return ipow(x, n); },
        [n, ipow](double x, double) { return n == 0 ? 0.0 : n * ipow(x, n - 1); });
}

inline Tensor square(const Tensor& a) {
    return detail::unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

inline Tensor sin(const Tensor& a) {
    return detail::unary(
        "sin", a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

inline Tensor cos(const Tensor& a) {
    return detail::unary(
        "cos", a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

inline Tensor exp(const Tensor& a) {
    return detail::unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Tensor abs(const Tensor& a) {
    return detail::unary(
        "abs", a, [](double x) { return std::abs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

inline double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double silu_scalar(double x) { return x * sigmoid_scalar(x); }

inline Tensor silu(const Tensor& a) {
    return detail::unary("silu", a, silu_scalar, [](double x, double) {
        const double s = sigmoid_scalar(x);
        return s * (1.0 + x * (1.0 - s));
    });
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& a) {
    const auto& v = a.values();
    double s = 0.0;
    for (double x : v) s += x;
    Tensor r = detail::make_result(Shape{}, {s});
    if (detail::should_record({&a})) {
        detail::attach(r, "sum", {a}, [](detail::Node& self) {
            auto* ga = detail::grad_of(self, 0);
            if (!ga) return;
            const double g = self.grad[0];
            for (auto& x : *ga) x += g;
        });
    }
    return r;
}

inline Tensor mean(const Tensor& a) {
    if (a.numel() == 0) throw ShapeError("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

namespace detail {

struct AxisSplit {
    std::size_t outer, len, inner;
};

inline AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
    if (axis >= s.size()) throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    AxisSplit r{1, s[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

}  // namespace detail

inline Tensor sum_axis(const Tensor& a, std::size_t axis, bool keepdim = false) {
    auto [outer, len, inner] = detail::split_axis(a.shape(), axis, "sum_axis");
    Shape out_shape = a.shape();
    if (keepdim)
        out_shape[axis] = 1;
    else
        out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    std::vector<double> out(outer * inner, 0.0);
    const auto& v = a.values();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t l = 0; l < len; ++l) {
            const double* src = v.data() + (o * len + l) * inner;
            double* dst = out.data() + o * inner;
            for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
    Tensor r = detail::make_result(out_shape, std::move(out));
    if (detail::should_record({&a})) {
        detail::attach(r, "sum_axis", {a}, [outer = outer, len = len, inner = inner](detail::Node& self) {
            auto* ga = detail::grad_of(self, 0);
            if (!ga) return;
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t l = 0; l < len; ++l) {
                    double* dst = ga->data() + (o * len + l) * inner;
                    const double* g = self.grad.data() + o * inner;
                    for (std::size_t i = 0; i < inner; ++i) dst[i] += g[i];
                }
        });
    }
    return r;
}

inline Tensor mean_axis(const Tensor& a, std::size_t axis, bool keepdim = false) {
    const auto len = detail::split_axis(a.shape(), axis, "mean_axis").len;
    return scale(sum_axis(a, axis, keepdim), 1.0 / static_cast<double>(len));
}

// ---------------------------------------------------------------------------
// Shape ops

inline Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) throw ShapeError("reshape", a.shape(), shape);
    Tensor r = detail::make_result(std::move(shape), a.values());
    if (detail::should_record({&a})) {
        detail::attach(r, "reshape", {a}, [](detail::Node& self) {
            auto* ga = detail::grad_of(self, 0);
            if (!ga) return;
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
        });
    }
    return r;
}

namespace detail {

inline std::vector<std::size_t> strides_of(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
    return st;
}

// For each output linear index, the source linear index under the permutation.
inline std::vector<std::size_t> permute_map(const Shape& in, const std::vector<std::size_t>& perm) {
    const auto in_strides = strides_of(in);
    Shape out(perm.size());
    std::vector<std::size_t> src_stride(perm.size());
    for (std::size_t k = 0; k < perm.size(); ++k) {
        out[k] = in[perm[k]];
        src_stride[k] = in_strides[perm[k]];
    }
    const std::size_t n = shape_numel(in);
    std::vector<std::size_t> map(n);
    std::vector<std::size_t> idx(perm.size(), 0);
    std::size_t src = 0;
    for (std::size_t o = 0; o < n; ++o) {
        map[o] = src;
        for (std::size_t k = perm.size(); k-- > 0;) {
            if (++idx[k] < out[k]) {
                src += src_stride[k];
                break;
            }
            src -= src_stride[k] * (out[k] - 1);
            idx[k] = 0;
        }
    }
    return map;
}

}  // namespace detail

inline Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm) {
    const auto& s = a.shape();
    if (perm.size() != s.size()) throw ShapeError("permute: permutation rank mismatch for " + shape_str(s));
    std::vector<bool> seen(perm.size(), false);
    for (auto p : perm) {
        if (p >= perm.size() || seen[p]) throw ShapeError("permute: invalid permutation for " + shape_str(s));
        seen[p] = true;
    }
    Shape out_shape(perm.size());
    for (std::size_t k = 0; k < perm.size(); ++k) out_shape[k] = s[perm[k]];
    auto map = std::make_shared<std::vector<std::size_t>>(detail::permute_map(s, perm));
    const auto& v = a.values();
    std::vector<double> out(v.size());
    for (std::size_t o = 0; o < out.size(); ++o) out[o] = v[(*map)[o]];
    Tensor r = detail::make_result(out_shape, std::move(out));
    if (detail::should_record({&a})) {
        detail::attach(r, "permute", {a}, [map](detail::Node& self) {
            auto* ga = detail::grad_of(self, 0);
            if (!ga) return;
            for (std::size_t o = 0; o < self.grad.size(); ++o) (*ga)[(*map)[o]] += self.grad[o];
        });
    }
    return r;
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(a.shape()));
    return permute(a, {1, 0});
}

inline Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
    auto [outer, len, inner] = detail::split_axis(a.shape(), axis, "slice");
    if (begin >= end || end > len)
        throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for axis " +
                         std::to_string(axis) + " of " + shape_str(a.shape()));
    Shape out_shape = a.shape();
    out_shape[axis] = end - begin;
    const std::size_t w = end - begin;
    std::vector<double> out(outer * w * inner);
    const auto& v = a.values();
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(v.data() + (o * len + begin) * inner, w * inner, out.data() + o * w * inner);
    Tensor r = detail::make_result(out_shape, std::move(out));
    if (detail::should_record({&a})) {
        detail::attach(r, "slice", {a}, [outer = outer, len = len, inner = inner, begin, w](detail::Node& self) {
            auto* ga = detail::grad_of(self, 0);
            if (!ga) return;
            for (std::size_t o = 0; o < outer; ++o) {
                double* dst = ga->data() + (o * len + begin) * inner;
                const double* g = self.grad.data() + o * w * inner;
                for (std::size_t i = 0; i < w * inner; ++i) dst[i] += g[i];
            }
        });
    }
    return r;
}

inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& s0 = parts[0].shape();
    auto [outer, len0, inner] = detail::split_axis(s0, axis, "concat");
    (void)len0;
    std::vector<std::size_t> lens;
    std::size_t total = 0;
    for (const auto& p : parts) {
        Shape a = p.shape(), b = s0;
        if (a.size() != b.size()) throw ShapeError("concat", s0, p.shape());
        a[axis] = b[axis] = 0;
        if (a != b) throw ShapeError("concat", s0, p.shape());
        lens.push_back(p.dim(axis));
        total += p.dim(axis);
    }
    Shape out_shape = s0;
    out_shape[axis] = total;
    std::vector<double> out(outer * total * inner);
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& v = parts[k].values();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(v.data() + o * lens[k] * inner, lens[k] * inner, out.data() + (o * total + off) * inner);
        off += lens[k];
    }
    Tensor r = detail::make_result(out_shape, std::move(out));
    if (detail::should_record(parts)) {
        detail::attach(r, "concat", parts, [outer = outer, inner = inner, lens, total](detail::Node& self) {
            std::size_t off = 0;
            for (std::size_t k = 0; k < lens.size(); ++k) {
                auto* gk = detail::grad_of(self, k);
                if (gk) {
                    for (std::size_t o = 0; o < outer; ++o) {
                        const double* g = self.grad.data() + (o * total + off) * inner;
                        double* dst = gk->data() + o * lens[k] * inner;
                        for (std::size_t i = 0; i < lens[k] * inner; ++i) dst[i] += g[i];
                    }
                }
                off += lens[k];
            }
        });
    }
    return r;
}

/// Inserts a new axis at `axis` of size n by repetition.
inline Tensor repeat_axis(const Tensor& a, std::size_t axis, std::size_t n) {
    if (axis > a.rank()) throw ShapeError("repeat_axis: axis out of range for " + shape_str(a.shape()));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= a.dim(i);
    for (std::size_t i = axis; i < a.rank(); ++i) inner *= a.dim(i);
    Shape out_shape = a.shape();
    out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), n);
    std::vector<double> out(outer * n * inner);
    const auto& v = a.values();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t k = 0; k < n; ++k) std::copy_n(v.data() + o * inner, inner, out.data() + (o * n + k) * inner);
    Tensor r = detail::make_result(out_shape, std::move(out));
    if (detail::should_record({&a})) {
        detail::attach(r, "repeat_axis", {a}, [outer, inner, n](detail::Node& self) {
            auto* ga = detail::grad_of(self, 0);
            if (!ga) return;
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t k = 0; k < n; ++k) {
                    const double* g = self.grad.data() + (o * n + k) * inner;
                    double* dst = ga->data() + o * inner;
                    for (std::size_t i = 0; i < inner; ++i) dst[i] += g[i];
                }
        });
    }
    return r;
}

// ---------------------------------------------------------------------------
// matmul: (..., K) x (K, N) -> (..., N); leading axes of `a` are batch axes.

namespace detail {

/// C (M x N) += A (M x K) * B (K x N), all row-major and dense. Each output
/// accumulates its K products in index order, so results do not depend on
/// the blocking.
inline void gemm_acc(std::size_t M, std::size_t K, std::size_t N, const double* A, const double* B, double* C) {
    constexpr std::size_t MR = 4, NR = 8;
    std::size_t i = 0;
    for (; i + MR <= M; i += MR) {
        std::size_t j = 0;
        for (; j + NR <= N; j += NR) {
            double acc[MR][NR];
            for (std::size_t r = 0; r < MR; ++r)
                for (std::size_t c = 0; c < NR; ++c) acc[r][c] = C[(i + r) * N + j + c];
            for (std::size_t k = 0; k < K; ++k) {
                const double* b = B + k * N + j;
                for (std::size_t r = 0; r < MR; ++r) {
                    const double s = A[(i + r) * K + k];
                    for (std::size_t c = 0; c < NR; ++c) acc[r][c] += s * b[c];
                }
            }
            for (std::size_t r = 0; r < MR; ++r)
                for (std::size_t c = 0; c < NR; ++c) C[(i + r) * N + j + c] = acc[r][c];
        }
        for (std::size_t r = 0; r < MR; ++r)
            for (std::size_t jj = j; jj < N; ++jj) {
                double acc = C[(i + r) * N + jj];
                for (std::size_t k = 0; k < K; ++k) acc += A[(i + r) * K + k] * B[k * N + jj];
                C[(i + r) * N + jj] = acc;
            }
    }
    for (; i < M; ++i)
        for (std::size_t jj = 0; jj < N; ++jj) {
            double acc = C[i * N + jj];
            for (std::size_t k = 0; k < K; ++k) acc += A[i * K + k] * B[k * N + jj];
            C[i * N + jj] = acc;
        }
}

inline std::vector<double> transposed(const double* src, std::size_t rows, std::size_t cols) {
    std::vector<double> out(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
    return out;
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 1 || b.rank() != 2 || a.shape().back() != b.dim(0)) throw ShapeError("matmul", a.shape(), b.shape());
    const std::size_t K = b.dim(0), N = b.dim(1);
    const std::size_t M = a.numel() / K;
    Shape out_shape = a.shape();
    out_shape.back() = N;
    std::vector<double> out(M * N, 0.0);
    detail::gemm_acc(M, K, N, a.data().data(), b.data().data(), out.data());
    Tensor r = detail::make_result(out_shape, std::move(out));
    if (detail::should_record({&a, &b})) {
        detail::attach(r, "matmul", {a, b}, [M, K, N](detail::Node& self) {
            const double* g = self.grad.data();
            const double* pa = self.inputs[0]->value.data();
            const double* pb = self.inputs[1]->value.data();
            if (auto* ga = detail::grad_of(self, 0)) {
                // dA (M x K) += G (M x N) * B^T (N x K)
                const auto bt = detail::transposed(pb, K, N);
                detail::gemm_acc(M, N, K, g, bt.data(), ga->data());
            }
            if (auto* gb = detail::grad_of(self, 1)) {
                // dB (K x N) += A^T (K x M) * G (M x N)
                const auto at = detail::transposed(pa, M, K);
                detail::gemm_acc(K, M, N, at.data(), g, gb->data());
            }
        });
    }
    return r;
}

// ---------------------------------------------------------------------------
// Moving average along `axis` with edge-replicated padding of (kernel-1)/2 on
// both ends; output keeps the input shape.

inline Tensor moving_average(const Tensor& a, std::size_t axis, std::size_t kernel) {
    auto [outer, len, inner] = detail::split_axis(a.shape(), axis, "moving_average");
    if (kernel == 0 || kernel % 2 == 0) throw std::invalid_argument("moving_average: kernel must be odd and positive");
    if (kernel > 2 * len - 1)
        throw std::invalid_argument("moving_average: kernel " + std::to_string(kernel) + " exceeds 2L-1 = " +
                                    std::to_string(2 * len - 1));
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kernel / 2);
    const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(len) - 1;
    auto clamp_t = [last](std::ptrdiff_t t) { return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(t, 0, last)); };
    const double inv = 1.0 / static_cast<double>(kernel);
    const auto& v = a.values();
    std::vector<double> out(v.size(), 0.0);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t t = 0; t < len; ++t) {
            double* dst = out.data() + (o * len + t) * inner;
            for (std::ptrdiff_t w = -half; w <= half; ++w) {
                const double* src = v.data() + (o * len + clamp_t(static_cast<std::ptrdiff_t>(t) + w)) * inner;
                for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
            }
            for (std::size_t i = 0; i < inner; ++i) dst[i] *= inv;
        }
    Tensor r = detail::make_result(a.shape(), std::move(out));
    if (detail::should_record({&a})) {
        detail::attach(r, "moving_average", {a},
                       [outer = outer, len = len, inner = inner, half, clamp_t, inv](detail::Node& self) {
                           auto* ga = detail::grad_of(self, 0);
                           if (!ga) return;
                           for (std::size_t o = 0; o < outer; ++o)
                               for (std::size_t t = 0; t < len; ++t) {
                                   const double* g = self.grad.data() + (o * len + t) * inner;
                                   for (std::ptrdiff_t w = -half; w <= half; ++w) {
                                       double* dst =
                                           ga->data() + (o * len + clamp_t(static_cast<std::ptrdiff_t>(t) + w)) * inner;
                                       for (std::size_t i = 0; i < inner; ++i) dst[i] += g[i] * inv;
                                   }
                               }
                       });
    }
    return r;
}

// ---------------------------------------------------------------------------
// Graph traversal and backward

/// Operations reachable from `root`, ordered so every op's inputs precede it.
class Graph {
public:
    explicit Graph(const Tensor& root) {
        std::unordered_set<const detail::Node*> visited;
        std::vector<std::pair<detail::Node*, std::size_t>> stack;
        stack.emplace_back(root.node().get(), 0);
        visited.insert(root.node().get());
        while (!stack.empty()) {
            auto& [n, next] = stack.back();
            if (next < n->inputs.size()) {
                detail::Node* child = n->inputs[next++].get();
                if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
            } else {
                order_.push_back(n);
                stack.pop_back();
            }
        }
    }

    std::size_t size() const { return order_.size(); }
    const std::vector<detail::Node*>& order() const { return order_; }

    std::vector<std::string> op_names() const {
        std::vector<std::string> names;
        for (auto* n : order_) names.push_back(n->op);
        return names;
    }

private:
    std::vector<detail::Node*> order_;
};

/// Accumulates d(loss)/d(t) into every requires_grad tensor reachable from the
/// scalar `loss`. Leaf gradients persist (and add up across calls);
/// intermediate gradients are released unless retain_grad() was requested.
inline void backward(const Tensor& loss) {
    if (loss.numel() != 1 || loss.rank() > 1)
        throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
    if (!loss.requires_grad()) throw std::logic_error("backward: loss does not require grad");
    Graph graph(loss);
    auto& seed = loss.node()->grad_buffer();
    seed[0] += 1.0;
    const auto& order = graph.order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->is_leaf()) continue;
        if (!n->grad.empty()) n->backward(*n);
        if (!n->retain_grad && n != loss.node().get()) {
            n->grad.clear();
            n->grad.shrink_to_fit();
        }
    }
}

}  // namespace itfkan
