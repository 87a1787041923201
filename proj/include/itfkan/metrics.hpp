#pragma once

// Point-forecast metrics: MSE, MAE, sMAPE, MASE and OWA against the
// seasonally adjusted naive (naive2) reference of the M4 competition.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace itfkan {

class MetricError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MetricSet {
    double mse = 0.0;
    double mae = 0.0;
    double smape = 0.0;
    double mase = 0.0;
    std::optional<double> owa;
    std::size_t mase_flagged = 0;  // series skipped for a zero MASE denominator
};

/// Seasonal period by frequency tag.
inline std::size_t seasonal_period(const std::string& tag) {
    if (tag == "yearly" || tag == "weekly" || tag == "daily") return 1;
    if (tag == "quarterly") return 4;
    if (tag == "monthly") return 12;
    if (tag == "hourly") return 24;
    throw std::invalid_argument("unknown frequency tag '" + tag + "' (yearly, quarterly, monthly, weekly, daily, hourly)");
}

namespace detail {

inline void same_length(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw MetricError("metrics: forecast and target lengths differ");
    if (a.empty()) throw MetricError("metrics: empty forecast");
}

}  // namespace detail

inline double mse(const std::vector<double>& pred, const std::vector<double>& target) {
    detail::same_length(pred, target);
    double s = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) s += (pred[k] - target[k]) * (pred[k] - target[k]);
    return s / static_cast<double>(pred.size());
}

inline double mae(const std::vector<double>& pred, const std::vector<double>& target) {
    detail::same_length(pred, target);
    double s = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) s += std::abs(pred[k] - target[k]);
    return s / static_cast<double>(pred.size());
}

/// (200/H) sum |p - y| / (|p| + |y|), with 0/0 terms as 0.
inline double smape(const std::vector<double>& pred, const std::vector<double>& target) {
    detail::same_length(pred, target);
    double s = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double den = std::abs(pred[k]) + std::abs(target[k]);
        if (den > 0.0) s += std::abs(pred[k] - target[k]) / den;
    }
    return 200.0 * s / static_cast<double>(pred.size());
}

/// In-sample mean of |y_t - y_{t-m}|.
inline double mase_scale(const std::vector<double>& history, std::size_t m) {
    if (m == 0) throw std::invalid_argument("mase: seasonal period must be >= 1");
    if (history.size() <= m) throw MetricError("mase: history shorter than one seasonal period");
    double s = 0.0;
    for (std::size_t t = m; t < history.size(); ++t) s += std::abs(history[t] - history[t - m]);
    s /= static_cast<double>(history.size() - m);
    if (!(s > 0.0)) throw MetricError("mase: constant history gives a zero scale");
    return s;
}

inline double mase(const std::vector<double>& pred, const std::vector<double>& target, const std::vector<double>& history,
                   std::size_t m) {
    return mae(pred, target) / mase_scale(history, m);
}

// ---------------------------------------------------------------------------
// naive2

/// Sample autocorrelation at lag k.
inline double autocorrelation(const std::vector<double>& x, std::size_t k) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = k; i < x.size(); ++i) num += (x[i] - mean) * (x[i - k] - mean);
    for (double v : x) den += (v - mean) * (v - mean);
    return den > 0.0 ? num / den : 0.0;
}

/// 90% autocorrelation test for seasonality at period m, as used by the M4 reference.
inline bool seasonality_test(const std::vector<double>& x, std::size_t m) {
    if (m <= 1 || x.size() < 3 * m) return false;
    double s = autocorrelation(x, 1);
    for (std::size_t i = 2; i < m; ++i) s += std::pow(autocorrelation(x, i), 2);
    const double limit = 1.645 * std::sqrt((1.0 + 2.0 * s) / static_cast<double>(x.size()));
    return std::abs(autocorrelation(x, m)) > limit;
}

/// Multiplicative seasonal indices by phase (t mod m), normalized to mean 1;
/// empty when the centered moving-average trend is not strictly positive.
inline std::vector<double> seasonal_indices(const std::vector<double>& x, std::size_t m) {
    const std::size_t n = x.size();
    std::vector<double> filt;
    if (m % 2 == 0) {
        filt.assign(m + 1, 1.0 / static_cast<double>(m));
        filt.front() = filt.back() = 0.5 / static_cast<double>(m);
    } else {
        filt.assign(m, 1.0 / static_cast<double>(m));
    }
    const std::size_t half = filt.size() / 2;
    std::vector<double> sum(m, 0.0);
    std::vector<std::size_t> count(m, 0);
    for (std::size_t t = half; t + half < n; ++t) {
        double trend = 0.0;
        for (std::size_t j = 0; j < filt.size(); ++j) trend += filt[j] * x[t - half + j];
        if (!(trend > 0.0)) return {};
        sum[t % m] += x[t] / trend;
        ++count[t % m];
    }
    std::vector<double> idx(m);
    double mean = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
        if (count[p] == 0) return {};
        idx[p] = sum[p] / static_cast<double>(count[p]);
        mean += idx[p];
    }
    mean /= static_cast<double>(m);
    for (auto& v : idx) v /= mean;
    return idx;
}

/// Seasonally adjusted naive forecast: the last deseasonalized value,
/// reseasonalized over the horizon. Plain naive when no seasonality is
/// detected or the multiplicative decomposition is undefined.
inline std::vector<double> naive2_forecast(const std::vector<double>& history, std::size_t horizon, std::size_t m) {
    if (history.empty()) throw MetricError("naive2: empty history");
    const std::size_t n = history.size();
    std::vector<double> idx;
    if (seasonality_test(history, m)) idx = seasonal_indices(history, m);
    std::vector<double> out(horizon);
    if (idx.empty()) {
        std::fill(out.begin(), out.end(), history.back());
        return out;
    }
    const double level = history.back() / idx[(n - 1) % m];
    for (std::size_t h = 0; h < horizon; ++h) out[h] = level * idx[(n + h) % m];
    return out;
}

// ---------------------------------------------------------------------------
// Aggregation

/// Accumulates metrics over many series. MSE/MAE pool every point; sMAPE and
/// MASE average per-series values; OWA compares those means to naive2's.
class MetricAccumulator {
public:
    void add_point_errors(const std::vector<double>& pred, const std::vector<double>& target) {
        detail::same_length(pred, target);
        for (std::size_t k = 0; k < pred.size(); ++k) {
            const double e = pred[k] - target[k];
            sq_ += e * e;
            abs_ += std::abs(e);
        }
        points_ += pred.size();
    }

    void add_relative(const std::vector<double>& pred, const std::vector<double>& target, const std::vector<double>& history,
                      std::size_t m, bool with_naive2) {
        smape_ += smape(pred, target);
        ++series_;
        std::vector<double> ref;
        if (with_naive2) {
            ref = naive2_forecast(history, target.size(), m);
            naive_smape_ += smape(ref, target);
        }
        try {
            const double scale = mase_scale(history, m);
            mase_ += mae(pred, target) / scale;
            if (with_naive2) naive_mase_ += mae(ref, target) / scale;
            ++mase_series_;
        } catch (const MetricError&) {
            ++flagged_;
        }
        with_naive2_ = series_ == 1 ? with_naive2 : (with_naive2_ && with_naive2);
    }

    void add(const std::vector<double>& pred, const std::vector<double>& target, const std::vector<double>& history, std::size_t m,
             bool with_naive2) {
        add_point_errors(pred, target);
        add_relative(pred, target, history, m, with_naive2);
    }

    MetricSet result() const {
        if (points_ == 0 || series_ == 0) throw MetricError("metrics: nothing accumulated");
        const double nan = std::numeric_limits<double>::quiet_NaN();
        MetricSet r;
        r.mse = sq_ / static_cast<double>(points_);
        r.mae = abs_ / static_cast<double>(points_);
        r.smape = smape_ / static_cast<double>(series_);
        r.mase = mase_series_ ? mase_ / static_cast<double>(mase_series_) : nan;
        r.mase_flagged = flagged_;
        if (with_naive2_) {
            const double ns = naive_smape_ / static_cast<double>(series_);
            const double nm = mase_series_ ? naive_mase_ / static_cast<double>(mase_series_) : nan;
            r.owa = 0.5 * (r.smape / ns + r.mase / nm);
        }
        return r;
    }

private:
    double sq_ = 0.0, abs_ = 0.0, smape_ = 0.0, mase_ = 0.0, naive_smape_ = 0.0, naive_mase_ = 0.0;
    std::size_t points_ = 0, series_ = 0, mase_series_ = 0, flagged_ = 0;
    bool with_naive2_ = false;
};

/// All metrics for one series. `naive2_ref`, when given, is the reference
/// forecast for OWA.
inline MetricSet metrics(const std::vector<double>& pred, const std::vector<double>& target, const std::vector<double>& history,
                         std::size_t m, const std::vector<double>* naive2_ref = nullptr) {
    MetricSet r;
    r.mse = mse(pred, target);
    r.mae = mae(pred, target);
    r.smape = smape(pred, target);
    const double scale = mase_scale(history, m);
    r.mase = r.mae / scale;
    if (naive2_ref) r.owa = 0.5 * (r.smape / smape(*naive2_ref, target) + r.mase / (mae(*naive2_ref, target) / scale));
    return r;
}

/// key=value lines with six decimals, e.g. "mse=0.385000".
inline std::string format_metrics(const MetricSet& m) {
    std::string out;
    char buf[64];
    auto line = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%s=%.6f\n", key, v);
        out += buf;
    };
    line("mse", m.mse);
    line("mae", m.mae);
    line("smape", m.smape);
    line("mase", m.mase);
    if (m.owa) line("owa", *m.owa);
    if (m.mase_flagged) out += "mase_flagged=" + std::to_string(m.mase_flagged) + "\n";
    return out;
}

}  // namespace itfkan
