#include <gtest/gtest.h>

#include <random>

#include "itfkan/adam.hpp"
#include "itfkan/gradcheck.hpp"
#include "itfkan/tensor.hpp"

using namespace itfkan;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = u(rng);
    return Tensor(std::move(shape), std::move(v));
}

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
    EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(t.numel(), 6u);
    EXPECT_EQ(t.at({1, 2}), 6.0);
}

TEST(Tensor, MatmulHandOracle) {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 2}, {5, 6, 7, 8});
    auto c = matmul(a, b);
    EXPECT_EQ(c.values(), (std::vector<double>{19, 22, 43, 50}));
    Tensor eye({2, 2}, {1, 0, 0, 1});
    EXPECT_EQ(matmul(a, eye).values(), a.values());
}

TEST(Tensor, MatmulShapeErrorNamesOpAndShapes) {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 3});
    try {
        matmul(a, b);
        FAIL();
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("matmul"), std::string::npos);
        EXPECT_NE(msg.find("(2, 3)"), std::string::npos);
    }
}

TEST(Tensor, BroadcastOnlyOnLeadingAxes) {
    Tensor a = Tensor::full({2, 3}, 1.0);
    EXPECT_NO_THROW(add(a, Tensor::vector({1, 2, 3})));
    EXPECT_NO_THROW(add(a, Tensor::scalar(2.0)));
    EXPECT_THROW(add(a, Tensor::vector({1, 2})), ShapeError);
    EXPECT_THROW(add(a, Tensor::zeros({2, 1})), ShapeError);
    auto r = add(a, Tensor::vector({1, 2, 3}));
    EXPECT_EQ(r.values(), (std::vector<double>{2, 3, 4, 2, 3, 4}));
}

TEST(Tensor, SiluAtZero) { EXPECT_EQ(silu(Tensor::scalar(0.0)).item(), 0.0); }

TEST(Backward, SquareSum) {
    Tensor x = Tensor::vector({1, 2, 3}, true);
    backward(sum(mul(x, x)));
    EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{2, 4, 6}));
}

TEST(Backward, SinAtZero) {
    Tensor x = Tensor::vector({0.0}, true);
    backward(sum(sin(x)));
    EXPECT_EQ(x.grad()[0], 1.0);
}

TEST(Backward, FanOutAccumulates) {
    Tensor x = Tensor::scalar(3.0, true);
    Tensor y = scale(x, 2.0);
    backward(add(y, y));
    EXPECT_EQ(x.grad()[0], 4.0);
}

TEST(Backward, RejectsNonScalarLoss) {
    Tensor x = Tensor::vector({1, 2}, true);
    EXPECT_THROW(backward(scale(x, 2.0)), ShapeError);
}

TEST(Backward, GraphIsTopologicalAndVisitsOnce) {
    Tensor x = Tensor::vector({0.5, -0.25}, true);
    Tensor y = silu(x);
    Tensor z = mul(y, y);
    Tensor loss = sum(add(z, y));
    Graph g(loss);
    const auto& order = g.order();
    std::unordered_set<const detail::Node*> seen;
    for (auto* n : order) {
        EXPECT_TRUE(seen.insert(n).second);
        for (const auto& in : n->inputs)
            if (in->requires_grad) EXPECT_TRUE(seen.count(in.get())) << n->op;
    }
    EXPECT_EQ(order.back(), loss.node().get());
    EXPECT_EQ(g.size(), 5u);  // x, silu, mul, add, sum
}

TEST(Backward, CompositeMatchesFiniteDifferences) {
    std::mt19937_64 rng(7);
    Tensor x = random_tensor({3, 4}, rng);
    Tensor w = random_tensor({4, 2}, rng);
    auto f = [&] {
        auto h = silu(matmul(x, w));
        auto t = mul(sin(h), exp(scale(h, 0.3)));
        return mean(add(t, pow_int(h, 3)));
    };
    EXPECT_LT(gradient_check(f, {x, w}, 1e-5), 1e-4);
}

TEST(GradientCheck, LinearIsExact) {
    std::mt19937_64 rng(1);
    Tensor x = random_tensor({5}, rng);
    EXPECT_LT(gradient_check([](const Tensor& t) { return sum(t); }, x, 1e-5), 1e-9);
}

TEST(GradientCheck, ZeroStepRejected) {
    Tensor x = Tensor::vector({1.0});
    EXPECT_THROW(gradient_check([](const Tensor& t) { return sum(t); }, x, 0.0), std::invalid_argument);
}

TEST(GradientCheck, NonFiniteRejected) {
    Tensor x = Tensor::vector({0.0});
    auto f = [](const Tensor& t) { return sum(div(Tensor::scalar(1.0), t)); };
    EXPECT_THROW(gradient_check(f, x, 1e-5), std::domain_error);
}

// Every differentiable primitive, 100 random draws each.
TEST(GradientCheck, EveryPrimitiveProperty) {
    using Fn = std::function<Tensor(const Tensor&, const Tensor&)>;
    const std::vector<std::pair<std::string, Fn>> prims = {
        {"add", [](const Tensor& a, const Tensor& b) { return add(a, b); }},
        {"sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }},
        {"mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }},
        {"div", [](const Tensor& a, const Tensor& b) { return div(a, add_scalar(square(b), 0.5)); }},
        {"bcast_mul", [](const Tensor& a, const Tensor& b) { return mul(a, reshape(slice(b, 0, 0, 1), {3})); }},
        {"matmul", [](const Tensor& a, const Tensor& b) { return matmul(a, transpose(b)); }},
        {"pow_int", [](const Tensor& a, const Tensor&) { return pow_int(a, 3); }},
        {"sin", [](const Tensor& a, const Tensor&) { return sin(a); }},
        {"cos", [](const Tensor& a, const Tensor&) { return cos(a); }},
        {"exp", [](const Tensor& a, const Tensor&) { return exp(a); }},
        {"silu", [](const Tensor& a, const Tensor&) { return silu(a); }},
        {"hypot", [](const Tensor& a, const Tensor& b) { return hypot(a, b); }},
        {"atan2", [](const Tensor& a, const Tensor& b) { return sin(atan2(a, b)); }},
        {"mean_axis", [](const Tensor& a, const Tensor&) { return mean_axis(a, 0); }},
        {"sum_axis", [](const Tensor& a, const Tensor&) { return sum_axis(a, 1, true); }},
        {"reshape", [](const Tensor& a, const Tensor&) { return square(reshape(a, {6})); }},
        {"permute", [](const Tensor& a, const Tensor& b) { return mul(permute(a, {1, 0}), permute(b, {1, 0})); }},
        {"concat", [](const Tensor& a, const Tensor& b) { return square(concat({a, b}, 1)); }},
        {"slice", [](const Tensor& a, const Tensor&) { return square(slice(a, 1, 1, 3)); }},
        {"repeat_axis", [](const Tensor& a, const Tensor&) { return square(repeat_axis(a, 1, 3)); }},
        {"moving_average", [](const Tensor& a, const Tensor&) { return square(moving_average(a, 1, 3)); }},
    };
    std::mt19937_64 rng(42);
    // fixed weights so each scalar reduction has nontrivial gradients
    for (const auto& [name, fn] : prims) {
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            Tensor a = random_tensor({2, 3}, rng);
            Tensor b = random_tensor({2, 3}, rng);
            const auto probe_shape = fn(a, b).shape();
            Tensor probe = random_tensor(probe_shape, rng);
            worst = std::max(worst, gradient_check([&] { return sum(mul(fn(a, b), probe)); }, {a, b}, 1e-5));
        }
        EXPECT_LT(worst, 1e-4) << name;
    }
}

TEST(Reductions, MeanTimesLengthEqualsSum) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        Tensor a = random_tensor({4, 7, 3}, rng, -10, 10);
        auto m = scale(mean_axis(a, 1), 7.0);
        auto s = sum_axis(a, 1);
        for (std::size_t i = 0; i < s.numel(); ++i)
            EXPECT_NEAR(m.data()[i], s.data()[i], 1e-12 * std::max(1.0, std::abs(s.data()[i])));
    }
}

TEST(Primitives, BitStableAcrossRuns) {
    std::mt19937_64 r1(5), r2(5);
    Tensor a1 = random_tensor({8, 8}, r1), a2 = random_tensor({8, 8}, r2);
    auto f = [](const Tensor& a) { return silu(matmul(sin(a), exp(a))); };
    EXPECT_EQ(f(a1).values(), f(a2).values());
}

TEST(Primitives, PhaseConventions) {
    EXPECT_EQ(atan2(Tensor::scalar(0.0), Tensor::scalar(0.0)).item(), 0.0);
    EXPECT_EQ(atan2(Tensor::scalar(-0.0), Tensor::scalar(-1.0)).item(), M_PI);
    Tensor re = Tensor::scalar(0.0, true), im = Tensor::scalar(0.0, true);
    backward(add(hypot(re, im), atan2(im, re)));
    EXPECT_EQ(re.grad()[0], 0.0);
    EXPECT_EQ(im.grad()[0], 0.0);
}

TEST(Adam, ZeroGradLeavesParamUnchanged) {
    Tensor p = Tensor::vector({1.5, -2.0}, true);
    p.grad_mut();
    AdamState st(0.1);
    std::vector<Tensor> ps{p};
    adam_step(ps, st);
    EXPECT_EQ(p.data()[0], 1.5);
    EXPECT_EQ(p.data()[1], -2.0);
    EXPECT_FALSE(p.has_grad());
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
    Tensor p = Tensor::scalar(0.0, true);
    std::vector<Tensor> ps{p};
    AdamState st(0.01);
    backward(scale(p, 3.0));
    adam_step(ps, st);
    EXPECT_NEAR(p.item(), -0.01, 1e-9);
}

TEST(Adam, TwoStepQuadraticMatchesScalarReference) {
    // Reference values from a scalar Adam written independently (beta1=0.9, beta2=0.999, eps=1e-8).
    Tensor x = Tensor::scalar(1.0, true);
    std::vector<Tensor> ps{x};
    AdamState st(0.1);
    backward(square(x));
    adam_step(ps, st);
    EXPECT_NEAR(x.item(), 0.9000000005, 1e-15);
    backward(square(x));
    adam_step(ps, st);
    EXPECT_NEAR(x.item(), 0.8004122286917927, 1e-15);
    EXPECT_EQ(st.step, 2);
}

TEST(Adam, MissingGradIsError) {
    Tensor p = Tensor::scalar(1.0, true);
    std::vector<Tensor> ps{p};
    AdamState st;
    EXPECT_THROW(adam_step(ps, st), std::logic_error);
}
