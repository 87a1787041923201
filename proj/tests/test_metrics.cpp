#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "itfkan/metrics.hpp"
#include "itfkan/random.hpp"

using namespace itfkan;

TEST(Metrics, PerfectForecastIsZero) {
    std::vector<double> y{1, 2, 3, 4}, h{0, 1, 3, 2, 5};
    auto m = metrics(y, y, h, 1);
    EXPECT_EQ(m.mse, 0.0);
    EXPECT_EQ(m.mae, 0.0);
    EXPECT_EQ(m.smape, 0.0);
    EXPECT_EQ(m.mase, 0.0);
    EXPECT_FALSE(m.owa);
}

TEST(Metrics, DirectFormulaExample) {
    std::vector<double> p{1, 1}, y{0, 2};
    EXPECT_DOUBLE_EQ(mse(p, y), 1.0);
    EXPECT_DOUBLE_EQ(mae(p, y), 1.0);
}

TEST(Metrics, HandComputedSmapeAndMase) {
    std::vector<double> p{2}, y{1}, h{0, 1, 0, 1};
    auto m = metrics(p, y, h, 1);
    EXPECT_NEAR(m.smape, 66.666667, 5e-7);
    EXPECT_DOUBLE_EQ(m.mase, 1.0);
    EXPECT_EQ(format_metrics(m), "mse=1.000000\nmae=1.000000\nsmape=66.666667\nmase=1.000000\n");
}

TEST(Metrics, ZeroOverZeroSmapeTermsVanish) {
    EXPECT_EQ(smape({0, 0}, {0, 0}), 0.0);
    EXPECT_DOUBLE_EQ(smape({0, 1}, {0, -1}), 100.0);
}

TEST(Metrics, SmapeBounded) {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> p(5), y(5);
        for (auto& v : p) v = rng.uniform(-10, 10);
        for (auto& v : y) v = rng.uniform(-10, 10);
        const double s = smape(p, y);
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 200.0);
    }
}

TEST(Metrics, EqualMagnitudeErrorsGiveMseEqualsMaeSquared) {
    std::vector<double> p{1, 4, -2}, y{1.5, 3.5, -1.5};
    EXPECT_DOUBLE_EQ(mse(p, y), mae(p, y) * mae(p, y));
}

TEST(Metrics, PermutationInvariantOverSeries) {
    Rng rng(4);
    std::vector<std::vector<double>> preds, targets, hists;
    for (int s = 0; s < 6; ++s) {
        std::vector<double> p(4), y(4), h(30);
        for (auto& v : p) v = rng.uniform(1, 5);
        for (auto& v : y) v = rng.uniform(1, 5);
        for (std::size_t t = 0; t < h.size(); ++t) h[t] = 3.0 + std::sin(t * 0.9) + rng.uniform(0, 0.3);
        preds.push_back(p);
        targets.push_back(y);
        hists.push_back(h);
    }
    auto run = [&](const std::vector<int>& order) {
        MetricAccumulator acc;
        for (int k : order) acc.add(preds[k], targets[k], hists[k], 7, true);
        return acc.result();
    };
    auto a = run({0, 1, 2, 3, 4, 5}), b = run({5, 3, 1, 0, 2, 4});
    EXPECT_NEAR(a.mse, b.mse, 1e-12);
    EXPECT_NEAR(a.mae, b.mae, 1e-12);
    EXPECT_NEAR(a.smape, b.smape, 1e-12);
    EXPECT_NEAR(a.mase, b.mase, 1e-12);
    EXPECT_NEAR(*a.owa, *b.owa, 1e-12);
}

TEST(Mase, ConstantHistoryIsFlagged) {
    EXPECT_THROW(mase({1}, {2}, {3, 3, 3}, 1), MetricError);
    EXPECT_THROW(mase({1}, {2}, {3}, 1), MetricError);
    EXPECT_THROW(mase({1}, {2}, {3, 4}, 0), std::invalid_argument);
    MetricAccumulator acc;
    acc.add({1}, {2}, {3, 3, 3}, 1, false);
    acc.add({1}, {2}, {0, 1, 0}, 1, false);
    auto r = acc.result();
    EXPECT_EQ(r.mase_flagged, 1u);
    EXPECT_DOUBLE_EQ(r.mase, 1.0);
}

TEST(Naive2, NonSeasonalIsLastValue) {
    auto f = naive2_forecast({1, 5, 2, 7}, 3, 1);
    EXPECT_EQ(f, (std::vector<double>{7, 7, 7}));
}

TEST(Naive2, SeasonalSeriesFollowsIndices) {
    const std::size_t m = 4;
    const std::vector<double> pattern{1.2, 0.8, 1.1, 0.9};
    std::vector<double> h;
    for (std::size_t t = 0; t < 40; ++t) h.push_back(10.0 * pattern[t % m]);
    ASSERT_TRUE(seasonality_test(h, m));
    auto idx = seasonal_indices(h, m);
    for (std::size_t p = 0; p < m; ++p) EXPECT_NEAR(idx[p], pattern[p], 1e-12);
    auto f = naive2_forecast(h, 6, m);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(f[k], 10.0 * pattern[(40 + k) % m], 1e-12);
}

TEST(Owa, Naive2AgainstItselfIsExactlyOne) {
    Rng rng(9);
    for (std::size_t m : {1u, 4u, 12u}) {
        std::vector<double> h(60), y(8);
        for (std::size_t t = 0; t < h.size(); ++t) h[t] = 20.0 + 3.0 * std::sin(2.0 * M_PI * t / m) + rng.uniform(0, 1);
        for (auto& v : y) v = 20.0 + rng.uniform(-3, 3);
        auto ref = naive2_forecast(h, y.size(), m);
        auto r = metrics(ref, y, h, m, &ref);
        ASSERT_TRUE(r.owa);
        EXPECT_EQ(*r.owa, 1.0);
        MetricAccumulator acc;
        acc.add(ref, y, h, m, true);
        EXPECT_EQ(*acc.result().owa, 1.0);
    }
}

TEST(SeasonalPeriod, FrequencyTags) {
    EXPECT_EQ(seasonal_period("yearly"), 1u);
    EXPECT_EQ(seasonal_period("quarterly"), 4u);
    EXPECT_EQ(seasonal_period("monthly"), 12u);
    EXPECT_EQ(seasonal_period("weekly"), 1u);
    EXPECT_EQ(seasonal_period("daily"), 1u);
    EXPECT_EQ(seasonal_period("hourly"), 24u);
    EXPECT_THROW(seasonal_period("fortnightly"), std::invalid_argument);
}

TEST(Metrics, MismatchedLengthsRejected) {
    EXPECT_THROW(mse({1, 2}, {1}), MetricError);
    EXPECT_THROW(smape({}, {}), MetricError);
}
