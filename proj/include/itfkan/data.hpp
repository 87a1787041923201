#pragma once

// CSV ingestion, chronological splits, per-variate z-scoring and sliding
// windows. Values are stored row-major as (T, N): time by variate.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "itfkan/tensor.hpp"

namespace itfkan {

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SeriesDataset {
    std::string name;
    std::vector<std::string> variates;
    std::vector<double> values;  // (T, N) row-major
    std::string frequency = "hourly";

    std::size_t length() const { return variates.empty() ? 0 : values.size() / variates.size(); }
    std::size_t width() const { return variates.size(); }
    double at(std::size_t t, std::size_t n) const { return values[t * width() + n]; }
};

struct CsvSchema {
    char delimiter = ',';
    bool timestamp_column = true;  // first column is skipped
    std::string frequency = "hourly";
};

namespace detail {

inline std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(ws);
    s = s.substr(b, e - b + 1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, delim)) out.push_back(trim(cell));
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

/// Reads a header row of variate names followed by numeric rows.
inline SeriesDataset ingest_csv(const std::string& path, const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset '" + path + "'");
    SeriesDataset ds;
    ds.name = std::filesystem::path(path).stem().string();
    ds.frequency = schema.frequency;
    const std::size_t skip = schema.timestamp_column ? 1 : 0;

    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_line(line, schema.delimiter);
        if (ds.variates.empty()) {
            if (cells.size() <= skip) throw DataError(path + ": header has no variate columns");
            ds.variates.assign(cells.begin() + static_cast<std::ptrdiff_t>(skip), cells.end());
            continue;
        }
        if (cells.size() != ds.variates.size() + skip)
            throw DataError(path + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " columns, expected " +
                            std::to_string(ds.variates.size() + skip));
        for (std::size_t c = skip; c < cells.size(); ++c) {
            double v = 0.0;
            if (!detail::parse_double(cells[c], v))
                throw DataError(path + ": row " + std::to_string(row) + ", column " + std::to_string(c + 1) + " ('" +
                                (c - skip < ds.variates.size() ? ds.variates[c - skip] : "") + "'): not a number: '" + cells[c] +
                                "'");
            ds.values.push_back(v);
        }
    }
    if (ds.variates.empty()) throw DataError(path + ": empty file");
    if (ds.values.empty()) throw DataError(path + ": no data rows");
    return ds;
}

inline void write_csv(const std::string& path, const SeriesDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "date";
    for (const auto& v : ds.variates) out << ',' << v;
    out << '\n';
    char buf[64];
    for (std::size_t t = 0; t < ds.length(); ++t) {
        out << t;
        for (std::size_t n = 0; n < ds.width(); ++n) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.at(t, n));
            out << ',' << buf;
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Splits

struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

enum class SplitRule { Ratio, EttHourly, EttMinute };

/// ETTh* and ETTm* follow the 12/4/4-month convention; everything else the
/// 0.7/0.1/0.2 chronological ratios.
inline SplitRule split_rule_for(const std::string& name) {
    if (name.rfind("ETTh", 0) == 0) return SplitRule::EttHourly;
    if (name.rfind("ETTm", 0) == 0) return SplitRule::EttMinute;
    return SplitRule::Ratio;
}

/// Row ranges from which windows are cut. Validation and test ranges start L
/// rows before their split boundary so their first window's input lies in
/// the preceding split; `fit` is the train block used for statistics.
struct SplitPlan {
    IndexRange train, val, test, fit;
};

inline SplitPlan plan_splits(std::size_t T, std::size_t L, std::size_t F, SplitRule rule) {
    std::size_t train_end = 0, val_end = 0, test_end = 0;
    if (rule == SplitRule::Ratio) {
        const auto n_train = static_cast<std::size_t>(static_cast<double>(T) * 0.7);
        const auto n_test = static_cast<std::size_t>(static_cast<double>(T) * 0.2);
        train_end = n_train;
        val_end = T - n_test;
        test_end = T;
    } else {
        const std::size_t month = 30 * 24 * (rule == SplitRule::EttMinute ? 4 : 1);
        train_end = 12 * month;
        val_end = 16 * month;
        test_end = 20 * month;
        if (T < test_end)
            throw DataError("ETT split needs " + std::to_string(test_end) + " rows, dataset has " + std::to_string(T));
    }
    if (train_end < L) throw DataError("dataset too short: train split has fewer rows than the lookback");
    SplitPlan p;
    p.fit = {0, train_end};
    p.train = {0, train_end};
    p.val = {train_end - L, val_end};
    p.test = {val_end - L, test_end};
    const auto need = L + F;
    auto check = [need](const IndexRange& r, const char* what) {
        if (r.end < r.begin || r.size() < need)
            throw DataError(std::string(what) + " split has " + std::to_string(r.end < r.begin ? 0 : r.size()) +
                            " rows, needs at least L+F=" + std::to_string(need));
    };
    check(p.train, "train");
    check(p.val, "validation");
    check(p.test, "test");
    return p;
}

// ---------------------------------------------------------------------------
// Standardization

struct Standardizer {
    static constexpr double kStdFloor = 1e-8;

    std::vector<std::string> variates;
    std::vector<double> mean;
    std::vector<double> stdev;

    /// Population mean/std per variate over rows [range.begin, range.end).
    static Standardizer fit(const SeriesDataset& ds, IndexRange range) {
        if (range.size() == 0 || range.end > ds.length()) throw DataError("standardizer: empty or out-of-range fit block");
        Standardizer s;
        s.variates = ds.variates;
        const auto N = ds.width();
        s.mean.assign(N, 0.0);
        s.stdev.assign(N, 0.0);
        const double n = static_cast<double>(range.size());
        for (std::size_t t = range.begin; t < range.end; ++t)
            for (std::size_t c = 0; c < N; ++c) s.mean[c] += ds.at(t, c);
        for (auto& m : s.mean) m /= n;
        for (std::size_t t = range.begin; t < range.end; ++t)
            for (std::size_t c = 0; c < N; ++c) {
                const double e = ds.at(t, c) - s.mean[c];
                s.stdev[c] += e * e;
            }
        for (auto& v : s.stdev) v = std::max(std::sqrt(v / n), kStdFloor);
        return s;
    }

    std::size_t width() const { return mean.size(); }

    /// In-place on a (T, N) row-major buffer.
    std::vector<double> apply(std::vector<double> v) const {
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = (v[k] - mean[k % width()]) / stdev[k % width()];
        return v;
    }
    std::vector<double> invert(std::vector<double> v) const {
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = v[k] * stdev[k % width()] + mean[k % width()];
        return v;
    }
};

/// Line-oriented sidecar: "variate<TAB>mean<TAB>std".
inline void write_stats(const std::string& path, const Standardizer& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write stats '" + path + "'");
    char buf[128];
    for (std::size_t c = 0; c < s.width(); ++c) {
        std::snprintf(buf, sizeof buf, "\t%.17g\t%.17g\n", s.mean[c], s.stdev[c]);
        out << s.variates[c] << buf;
    }
    if (!out) throw DataError("failed writing stats '" + path + "'");
}

inline Standardizer read_stats(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open stats '" + path + "'");
    Standardizer s;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_line(line, '\t');
        double m = 0.0, sd = 0.0;
        if (cells.size() != 3 || !detail::parse_double(cells[1], m) || !detail::parse_double(cells[2], sd))
            throw DataError(path + ": malformed stats line " + std::to_string(row));
        s.variates.push_back(cells[0]);
        s.mean.push_back(m);
        s.stdev.push_back(sd);
    }
    if (s.mean.empty()) throw DataError(path + ": no stats");
    return s;
}

// ---------------------------------------------------------------------------
// Windows

struct WindowBatch {
    Tensor inputs;   // (B, N, L)
    Tensor targets;  // (B, N, F)
};

/// Stride-1 windows over one split of a standardized (T, N) buffer.
class WindowSet {
public:
    WindowSet() = default;
    WindowSet(std::shared_ptr<const std::vector<double>> data, std::size_t width, IndexRange range, std::size_t L, std::size_t F)
        : data_(std::move(data)), width_(width), range_(range), L_(L), F_(F) {
        if (range_.end * width_ > data_->size()) throw DataError("window range exceeds data");
    }

    std::size_t size() const { return data_ && range_.size() >= L_ + F_ ? range_.size() - L_ - F_ + 1 : 0; }
    bool empty() const { return size() == 0; }
    std::size_t width() const { return width_; }
    std::size_t lookback() const { return L_; }
    std::size_t horizon() const { return F_; }
    IndexRange range() const { return range_; }

    WindowBatch batch(const std::vector<std::size_t>& idx) const {
        const std::size_t B = idx.size(), N = width_;
        std::vector<double> x(B * N * L_), y(B * N * F_);
        for (std::size_t b = 0; b < B; ++b) {
            if (idx[b] >= size()) throw std::out_of_range("window index out of range");
            const std::size_t start = range_.begin + idx[b];
            for (std::size_t n = 0; n < N; ++n) {
                for (std::size_t t = 0; t < L_; ++t) x[(b * N + n) * L_ + t] = (*data_)[(start + t) * N + n];
                for (std::size_t t = 0; t < F_; ++t) y[(b * N + n) * F_ + t] = (*data_)[(start + L_ + t) * N + n];
            }
        }
        return {Tensor({B, N, L_}, std::move(x)), Tensor({B, N, F_}, std::move(y))};
    }

    WindowBatch range_batch(std::size_t first, std::size_t count) const {
        std::vector<std::size_t> idx(count);
        for (std::size_t k = 0; k < count; ++k) idx[k] = first + k;
        return batch(idx);
    }

private:
    std::shared_ptr<const std::vector<double>> data_;
    std::size_t width_ = 0;
    IndexRange range_;
    std::size_t L_ = 0, F_ = 0;
};

/// Flattens (B, N, len) to (B*N, len) so every variate is an independent row.
inline Tensor as_rows(const Tensor& t) { return reshape(t, {t.dim(0) * t.dim(1), t.dim(2)}); }

struct PreparedData {
    SplitPlan plan;
    Standardizer stats;
    std::shared_ptr<const std::vector<double>> standardized;
    WindowSet train, val, test;
};

inline PreparedData prepare(const SeriesDataset& ds, std::size_t L, std::size_t F, SplitRule rule) {
    PreparedData p;
    p.plan = plan_splits(ds.length(), L, F, rule);
    p.stats = Standardizer::fit(ds, p.plan.fit);
    p.standardized = std::make_shared<const std::vector<double>>(p.stats.apply(ds.values));
    p.train = WindowSet(p.standardized, ds.width(), p.plan.train, L, F);
    p.val = WindowSet(p.standardized, ds.width(), p.plan.val, L, F);
    p.test = WindowSet(p.standardized, ds.width(), p.plan.test, L, F);
    return p;
}

}  // namespace itfkan
