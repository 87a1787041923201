#include <gtest/gtest.h>

#include <complex>

#include "itfkan/gradcheck.hpp"
#include "itfkan/tf_synergy.hpp"

using namespace itfkan;

namespace {

// Naive DFT with the 1-based patch index of the forward transform.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const std::size_t P = x.size();
    std::vector<std::complex<double>> F(P);
    for (std::size_t k = 0; k < P; ++k)
        for (std::size_t p = 1; p <= P; ++p)
            F[k] += x[p - 1] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k * p) / static_cast<double>(P));
    return F;
}

Tensor sequence(const std::vector<double>& v) { return Tensor({1, v.size(), 1}, v); }

}  // namespace

TEST(Patch, CountFormula) {
    EXPECT_EQ((PatchConfig{6, 6}.count(96)), 17u);
    EXPECT_EQ((PatchConfig{4, 2}.count(8)), 4u);
    EXPECT_EQ((PatchConfig{5, 5}.count(5)), 2u);
    EXPECT_THROW((PatchConfig{9, 2}.count(8)), std::invalid_argument);
    EXPECT_THROW((PatchConfig{3, 4}.count(8)), std::invalid_argument);
}

TEST(Patch, WindowsReplicateTail) {
    Tensor x({1, 5, 1}, {1, 2, 3, 4, 5});
    auto w = patch_windows(x, {2, 2});
    ASSERT_EQ(w.shape(), (Shape{1, 3, 2}));
    EXPECT_EQ(w.values(), (std::vector<double>{1, 2, 3, 4, 5, 5}));
}

TEST(Patch, EncoderShape) {
    Rng rng(1);
    auto enc = PatchEncoder::init(6, 4, rng);
    auto out = patch(rng.uniform_tensor({3, 96, 4}, -1, 1, false), {6, 6}, enc);
    EXPECT_EQ(out.shape(), (Shape{3, 17, 4}));
}

TEST(Dft, ConstantIsDcOnly) {
    for (std::size_t P : {2u, 5u, 8u, 17u}) {
        auto spec = dft_patches(Tensor::full({1, P, 1}, -1.5));
        EXPECT_NEAR(spec.amplitude.data()[0], 1.5 * static_cast<double>(P), 1e-12);
        for (std::size_t k = 1; k < spectrum_bins(P); ++k) EXPECT_NEAR(spec.amplitude.data()[k], 0.0, 1e-12);
    }
}

TEST(Dft, AlternatingIsNyquist) {
    const std::size_t P = 8;
    std::vector<double> v(P);
    for (std::size_t p = 0; p < P; ++p) v[p] = p % 2 ? -1.0 : 1.0;
    auto spec = dft_patches(sequence(v));
    EXPECT_NEAR(spec.amplitude.data()[P / 2], static_cast<double>(P), 1e-12);
    for (std::size_t k = 0; k < P / 2; ++k) EXPECT_NEAR(spec.amplitude.data()[k], 0.0, 1e-12);
}

TEST(Dft, MatchesNaiveOracle) {
    Rng rng(3);
    for (std::size_t P = 2; P <= 64; ++P) {
        std::vector<double> v(P);
        for (auto& x : v) x = rng.uniform(-2, 2);
        auto spec = dft_patches(sequence(v));
        auto F = naive_dft(v);
        for (std::size_t k = 0; k < spectrum_bins(P); ++k) {
            const auto got = std::polar(spec.amplitude.data()[k], spec.phase.data()[k]);
            EXPECT_NEAR(got.real(), F[k].real(), 1e-9) << "P=" << P << " k=" << k;
            EXPECT_NEAR(got.imag(), F[k].imag(), 1e-9) << "P=" << P << " k=" << k;
            EXPECT_GE(spec.amplitude.data()[k], 0.0);
            EXPECT_GT(spec.phase.data()[k], -M_PI);
            EXPECT_LE(spec.phase.data()[k], M_PI);
        }
    }
}

TEST(Dft, Parseval) {
    Rng rng(4);
    for (std::size_t P = 2; P <= 40; ++P) {
        std::vector<double> v(P);
        double energy = 0.0;
        for (auto& x : v) {
            x = rng.uniform(-3, 3);
            energy += x * x;
        }
        auto spec = dft_patches(sequence(v));
        double spectral = 0.0;
        for (std::size_t k = 0; k < spectrum_bins(P); ++k) {
            const bool single = k == 0 || (P % 2 == 0 && k == P / 2);
            const double a = spec.amplitude.data()[k];
            spectral += (single ? 1.0 : 2.0) * a * a;
        }
        EXPECT_NEAR(spectral / static_cast<double>(P), energy, 1e-9 * energy);
    }
}

TEST(TfExpand, ZeroAmplitudeRowIsZero) {
    SpectrumResult s{Tensor({1, 3, 1}, {2.0, 0.0, 1.0}), Tensor({1, 3, 1}, {0.3, 1.1, -0.4})};
    auto grid = tf_expand(s, 5);
    ASSERT_EQ(grid.shape(), (Shape{1, 3, 5, 1}));
    for (std::size_t p = 0; p < 5; ++p) {
        EXPECT_EQ(grid.at({0, 1, p, 0}), 0.0);
        EXPECT_DOUBLE_EQ(grid.at({0, 0, p, 0}), 2.0 * std::cos(0.3));
    }
}

TEST(TfExpand, RowHasKPeriods) {
    const std::size_t P = 40, K = spectrum_bins(P);
    std::vector<double> amp(K, 1.0), ph(K, 0.1);
    auto grid = tf_expand({Tensor({1, K, 1}, amp), Tensor({1, K, 1}, ph)}, P);
    for (std::size_t k = 1; k < K - 1; ++k) {
        int crossings = 0;
        for (std::size_t p = 0; p < P; ++p) {
            const double a = grid.at({0, k, p, 0}), b = grid.at({0, k, (p + 1) % P, 0});
            if ((a < 0) != (b < 0)) ++crossings;
        }
        EXPECT_EQ(crossings, static_cast<int>(2 * k)) << "k=" << k;
    }
}

TEST(TfExpand, SingleToneReconstruction) {
    for (std::size_t P : {2u, 4u, 8u, 17u})
        for (std::size_t tone = 0; tone < spectrum_bins(P); ++tone) {
            std::vector<double> v(P);
            for (std::size_t p = 0; p < P; ++p)
                v[p] = 1.3 * std::cos(2 * M_PI * static_cast<double>(tone * p) / static_cast<double>(P) + 0.4) + 0.2;
            auto x = sequence(v);
            auto back = tf_reconstruct(tf_expand(dft_patches(x), P));
            for (std::size_t p = 0; p < P; ++p) EXPECT_NEAR(back.data()[p], v[p], 1e-9) << "P=" << P << " tone=" << tone;
        }
}

TEST(TfKan, EdgeCountForLookback96) {
    EXPECT_EQ(tfkan_edge_count(96, {6, 6}), 1377u);
    Rng rng(0);
    auto t = TfSynergy::init(96, 2, {6, 6}, rng);
    std::size_t total = 0;
    for (const auto& k : t.kans) total += k.layers[0].total_edges();
    EXPECT_EQ(total, 1377u);
}

TEST(TfKan, EdgeCountFormulaHoldsGenerally) {
    Rng rng(0);
    for (std::size_t L : {8u, 13u, 30u})
        for (std::size_t P = 1; P <= L; P += 3)
            for (std::size_t S = 1; S <= P; S += 2) {
                auto t = TfSynergy::init(L, 1, {P, S}, rng);
                std::size_t total = 0;
                for (const auto& k : t.kans) total += k.layers[0].total_edges();
                EXPECT_EQ(total, tfkan_edge_count(L, {P, S}));
            }
}

TEST(TfKan, ZeroWeightsGiveZero) {
    Rng rng(1);
    auto t = TfSynergy::init(12, 2, {4, 2}, rng);
    for (auto& k : t.kans)
        for (auto& l : k.layers)
            for (auto* p : {&l.weight, &l.a0, &l.a1, &l.a2})
                for (auto& v : p->data()) v = 0.0;
    auto grid = rng.uniform_tensor({3, t.bins(), t.patches(), 2}, -1, 1, false);
    auto h = tfkan_forward(grid, t.kans);
    EXPECT_EQ(h.shape(), (Shape{3, t.patches(), 2}));
    for (double v : h.values()) EXPECT_EQ(v, 0.0);
}

TEST(TfKan, SinglePatchScalarOracle) {
    Rng rng(2);
    std::vector<KanNetwork> kans{build_plain_kan({1, 1}, rng)};
    auto grid = rng.uniform_tensor({2, 1, 1, 3}, -2, 2, false);
    auto h = tfkan_forward(grid, kans);
    const auto e = kans[0].layers[0].edge(0, 0);
    for (std::size_t i = 0; i < 6; ++i) {
        const double x = grid.data()[i];
        const double expect = e.weight.item() * (silu_scalar(x) + e.coeffs.data()[0] + e.coeffs.data()[1] * x +
                                                 e.coeffs.data()[2] * x * x);
        EXPECT_NEAR(h.data()[i], expect, 1e-14);
    }
}

TEST(TfKan, WrongNetworkCount) {
    Rng rng(2);
    std::vector<KanNetwork> kans{build_plain_kan({3, 3}, rng)};
    EXPECT_THROW(tfkan_forward(Tensor::zeros({1, 3, 2, 1}), kans), ShapeError);
}

TEST(Unpatch, ZeroInputGivesBias) {
    Rng rng(5);
    auto u = Unpatcher::init(4, 10, rng);
    auto out = unpatch(Tensor::zeros({2, 4, 3}), u);
    ASSERT_EQ(out.shape(), (Shape{2, 10, 3}));
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t t = 0; t < 10; ++t)
            for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at({n, t, c}), u.bias.data()[t]);
}

TEST(Unpatch, IdentityMap) {
    Tensor eye = Tensor::zeros({5, 5});
    for (std::size_t i = 0; i < 5; ++i) eye.at({i, i}) = 1.0;
    Unpatcher u{eye, Tensor::zeros({5})};
    Rng rng(6);
    auto h = rng.uniform_tensor({2, 5, 3}, -1, 1, false);
    EXPECT_EQ(unpatch(h, u).values(), h.values());
}

TEST(Unpatch, MatrixProductOracle) {
    Rng rng(7);
    auto u = Unpatcher::init(4, 6, rng);
    auto h = rng.uniform_tensor({2, 4, 3}, -1, 1, false);
    auto out = unpatch(h, u);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t t = 0; t < 6; ++t)
            for (std::size_t c = 0; c < 3; ++c) {
                double acc = u.bias.data()[t];
                for (std::size_t p = 0; p < 4; ++p) acc += h.at({n, p, c}) * u.weight.at({p, t});
                EXPECT_NEAR(out.at({n, t, c}), acc, 1e-14);
            }
}

TEST(TfSynergyChain, GradientsEndToEnd) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        Rng rng(seed);
        auto t = TfSynergy::init(8, 2, {4, 2}, rng);
        Tensor x = rng.uniform_tensor({2, 8, 2}, -1, 1);
        Tensor probe = rng.uniform_tensor({2, 2, 8}, -1, 1, false);
        std::vector<Tensor> params{x};
        for (auto& [n, p] : t.parameters()) params.push_back(p);
        double err = gradient_check([&] { return sum(mul(t.forward(x), probe)); }, params, 1e-5);
        EXPECT_LT(err, 1e-4) << "seed " << seed;
    }
}
