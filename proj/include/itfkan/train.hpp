#pragma once

// Mini-batch Adam training with early stopping on the validation prediction
// loss, and test-split evaluation.

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "itfkan/adam.hpp"
#include "itfkan/data.hpp"
#include "itfkan/metrics.hpp"
#include "itfkan/model.hpp"
#include "itfkan/random.hpp"

namespace itfkan {

struct TrainOptions {
    Task task = Task::LongTerm;
    double lambda = 0.01;
    double learning_rate = 5e-4;
    std::size_t batch_size = 64;
    std::size_t epochs = 10;
    std::size_t patience = 3;
    std::size_t max_steps = 0;  // 0: no limit
    std::uint64_t seed = 2024;

    static TrainOptions from(const ModelConfig& c, Task task, std::uint64_t seed) {
        TrainOptions o;
        o.task = task;
        o.lambda = c.lambda;
        o.learning_rate = c.learning_rate;
        o.batch_size = c.batch_size;
        o.epochs = c.epochs;
        o.patience = c.patience;
        o.seed = seed;
        return o;
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_pred = 0.0;
    double val_pred = 0.0;
    double reg = 0.0;
    double total = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t steps = 0;
};

/// Per-row de-standardization for (B*N, F) forecasts of a batch of B windows.
inline RowScale row_scale(const Standardizer& stats, std::size_t windows, std::size_t len) {
    const std::size_t N = stats.width();
    Tensor sd = Tensor::zeros({windows * N, len}), mu = Tensor::zeros({windows * N, len});
    auto s = sd.data(), m = mu.data();
    for (std::size_t r = 0; r < windows * N; ++r)
        for (std::size_t t = 0; t < len; ++t) {
            s[r * len + t] = stats.stdev[r % N];
            m[r * len + t] = stats.mean[r % N];
        }
    return {sd, mu};
}

inline std::optional<RowScale> loss_scale(Task task, const Standardizer* stats, std::size_t windows, std::size_t len) {
    if (task == Task::ShortTerm && stats) return row_scale(*stats, windows, len);
    return std::nullopt;
}

/// Mean prediction loss over every window of `set`, without gradients.
inline double prediction_loss(const ForecastModel& model, const WindowSet& set, Task task, const Standardizer* stats,
                              std::size_t batch_size) {
    if (set.empty()) throw DataError("prediction_loss: no windows");
    NoGradGuard guard;
    double acc = 0.0;
    for (std::size_t first = 0; first < set.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, set.size() - first);
        auto b = set.range_batch(first, count);
        Tensor pred = model.forward(as_rows(b.inputs));
        Tensor target = as_rows(b.targets);
        auto scale = loss_scale(task, stats, count, set.horizon());
        const double l = task == Task::LongTerm ? mse_loss(pred, target).item()
                                                : (scale ? smape_loss(scale->apply(pred), scale->apply(target))
                                                         : smape_loss(pred, target))
                                                      .item();
        acc += l * static_cast<double>(count);
    }
    return acc / static_cast<double>(set.size());
}

namespace detail {

inline std::vector<std::vector<double>> snapshot(const ForecastModel& m) {
    std::vector<std::vector<double>> s;
    for (const auto& t : m.parameters()) s.push_back(t.values());
    return s;
}

inline void restore(ForecastModel& m, const std::vector<std::vector<double>>& s) {
    auto params = m.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) std::copy(s[k].begin(), s[k].end(), params[k].data().begin());
}

}  // namespace detail

/// Selects the seasonal frequencies from every training window's lookback and
/// initializes a model from `seed`.
inline ForecastModel build_model(const ModelConfig& cfg, const WindowSet& train_set, std::uint64_t seed) {
    if (train_set.empty()) throw DataError("build_model: empty training set");
    auto all = train_set.range_batch(0, train_set.size());
    auto sel = select_frequencies(as_rows(all.inputs), cfg);
    Rng rng(seed);
    return ForecastModel::build(cfg, sel.bins, rng);
}

/// Trains in place; the parameters of the best validation epoch are restored
/// at the end. `on_epoch` sees each record as soon as it is complete.
inline TrainResult train(ForecastModel& model, const WindowSet& train_set, const WindowSet& val_set, const TrainOptions& opt,
                         const Standardizer* stats = nullptr, const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    if (train_set.empty()) throw DataError("train: empty training set");
    if (opt.batch_size == 0 || opt.epochs == 0) throw std::invalid_argument("train: batch_size and epochs must be positive");
    Rng rng(opt.seed);
    AdamState adam(opt.learning_rate);
    auto params = model.parameters();
    TrainResult result;
    auto best = detail::snapshot(model);
    std::size_t bad_epochs = 0;
    std::vector<std::size_t> order(train_set.size());

    for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        double pred_sum = 0.0, reg_sum = 0.0, total_sum = 0.0;
        std::size_t seen = 0, batches = 0;
        bool out_of_steps = false;
        for (std::size_t first = 0; first < order.size(); first += opt.batch_size) {
            const std::size_t count = std::min(opt.batch_size, order.size() - first);
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(first),
                                         order.begin() + static_cast<std::ptrdiff_t>(first + count));
            auto b = train_set.batch(idx);
            Tensor pred = model.forward(as_rows(b.inputs));
            auto loss = total_loss(pred, as_rows(b.targets), model, opt.lambda, opt.task,
                                   loss_scale(opt.task, stats, count, train_set.horizon()));
            backward(loss.total);
            adam_step(params, adam);
            pred_sum += loss.values.pred * static_cast<double>(count);
            reg_sum += loss.values.reg();
            total_sum += loss.values.total;
            seen += count;
            ++batches;
            if (++result.steps == opt.max_steps) {
                out_of_steps = true;
                break;
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_pred = pred_sum / static_cast<double>(seen);
        rec.reg = reg_sum / static_cast<double>(batches);
        rec.total = total_sum / static_cast<double>(batches);
        rec.val_pred = val_set.empty() ? rec.train_pred : prediction_loss(model, val_set, opt.task, stats, opt.batch_size);
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.val_pred < result.best_val) {
            result.best_val = rec.val_pred;
            result.best_epoch = epoch;
            best = detail::snapshot(model);
            bad_epochs = 0;
        } else if (++bad_epochs > opt.patience) {
            break;
        }
        if (out_of_steps) break;
    }
    detail::restore(model, best);
    return result;
}

/// Test metrics: MSE/MAE on the standardized scale; sMAPE, MASE (and OWA
/// for short-term tasks) on the data scale, one series per (window, variate).
inline MetricSet evaluate(const ForecastModel& model, const WindowSet& set, const Standardizer& stats, Task task,
                          std::size_t period, std::size_t batch_size = 256) {
    if (set.empty()) throw DataError("evaluate: no windows");
    NoGradGuard guard;
    MetricAccumulator acc;
    const std::size_t N = set.width(), L = set.lookback(), F = set.horizon();
    for (std::size_t first = 0; first < set.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, set.size() - first);
        auto b = set.range_batch(first, count);
        Tensor pred = model.forward(as_rows(b.inputs));
        auto p = pred.data();
        auto y = b.targets.data();
        auto x = b.inputs.data();
        for (std::size_t r = 0; r < count * N; ++r) {
            const double sd = stats.stdev[r % N], mu = stats.mean[r % N];
            std::vector<double> ps(p.begin() + static_cast<std::ptrdiff_t>(r * F), p.begin() + static_cast<std::ptrdiff_t>((r + 1) * F));
            std::vector<double> ys(y.begin() + static_cast<std::ptrdiff_t>(r * F), y.begin() + static_cast<std::ptrdiff_t>((r + 1) * F));
            acc.add_point_errors(ps, ys);
            std::vector<double> pd(F), yd(F), hd(L);
            for (std::size_t t = 0; t < F; ++t) {
                pd[t] = ps[t] * sd + mu;
                yd[t] = ys[t] * sd + mu;
            }
            for (std::size_t t = 0; t < L; ++t) hd[t] = x[r * L + t] * sd + mu;
            acc.add_relative(pd, yd, hd, period, task == Task::ShortTerm);
        }
    }
    return acc.result();
}

}  // namespace itfkan
