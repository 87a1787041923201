#pragma once

// Assembled forecaster: embed -> decompose -> {TrendKAN, SeasonalKAN, TF branch}
// -> sum -> head (d -> 1, then L -> F). Variates are independent rows sharing
// every weight.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "itfkan/decomposition.hpp"
#include "itfkan/random.hpp"
#include "itfkan/taylor_kan.hpp"
#include "itfkan/tensor.hpp"
#include "itfkan/tf_synergy.hpp"

namespace itfkan {

struct ModelConfig {
    std::size_t lookback = 96;      // L
    std::size_t horizon = 96;       // F
    std::size_t d_model = 32;       // d
    std::size_t kernel = 25;        // moving-average window
    std::size_t trend_degree = 3;   // p
    std::size_t top_k = 5;          // K
    std::size_t patch_len = 6;      // P
    std::size_t stride = 6;         // S
    double lambda = 0.01;
    double learning_rate = 5e-4;
    std::size_t batch_size = 64;
    std::size_t epochs = 10;
    std::size_t patience = 3;

    PatchConfig patch() const { return {patch_len, stride}; }

    bool operator==(const ModelConfig&) const = default;

    void validate() const {
        auto positive = [](std::size_t v, const char* name) {
            if (v == 0) throw std::invalid_argument(std::string(name) + " must be positive");
        };
        positive(lookback, "lookback");
        positive(horizon, "horizon");
        positive(d_model, "d_model");
        positive(kernel, "kernel");
        positive(trend_degree, "trend_degree");
        positive(top_k, "top_k");
        positive(batch_size, "batch_size");
        positive(epochs, "epochs");
        if (kernel % 2 == 0) throw std::invalid_argument("kernel must be odd");
        if (kernel > lookback) throw std::invalid_argument("kernel must not exceed lookback");
        if (trend_degree > 3) throw std::invalid_argument("trend_degree must be at most 3");
        if (trend_degree > lookback) throw std::invalid_argument("trend_degree must not exceed lookback");
        if (2 * top_k > lookback) throw std::invalid_argument("top_k needs lookback >= 2K");
        if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
        patch().validate(lookback);
    }
};

struct ForecastHead {
    Tensor channel_weight;  // (d, 1)
    Tensor channel_bias;    // scalar
    Tensor time_weight;     // (L, F)
    Tensor time_bias;       // (F)

    static ForecastHead init(std::size_t d, std::size_t L, std::size_t F, Rng& rng) {
        const double rc = 1.0 / std::sqrt(static_cast<double>(d));
        const double rt = 1.0 / std::sqrt(static_cast<double>(L));
        return {rng.uniform_tensor({d, 1}, -rc, rc), rng.uniform_tensor({}, -rc, rc), rng.uniform_tensor({L, F}, -rt, rt),
                rng.uniform_tensor({F}, -rt, rt)};
    }
};

/// Node input ranges captured during a calibration pass.
struct ForwardTrace {
    std::vector<NodeRanges> trend;
    std::vector<NodeRanges> seasonal;
    std::vector<std::vector<NodeRanges>> tf;
};

/// Spectral bins of the K strongest non-DC frequencies of the training
/// series' seasonal component (rows of `series` are (variate, window) pairs).
inline FrequencySelection select_frequencies(const Tensor& series, const ModelConfig& cfg) {
    if (series.rank() != 2 || series.dim(1) != cfg.lookback)
        throw ShapeError("select_frequencies: expected (rows, L), got " + shape_str(series.shape()));
    // The embedding is affine and shared over channels, so the ranking of the
    // channel-averaged seasonal spectrum equals that of the raw series.
    NoGradGuard guard;
    Tensor x = reshape(series, {series.dim(0), cfg.lookback, 1});
    return top_k_frequencies(moving_average_decompose(x, cfg.kernel).seasonal, 1, cfg.top_k);
}

class ForecastModel {
public:
    ModelConfig config;
    std::vector<std::size_t> bins;  // SeasonalInject spectral bins
    Embedding embedding;
    KanNetwork trend_kan;
    KanNetwork seasonal_kan;
    TfSynergy tf;
    ForecastHead head;

    static ForecastModel build(const ModelConfig& cfg, std::vector<std::size_t> bins, Rng& rng) {
        cfg.validate();
        if (bins.size() != cfg.top_k)
            throw std::invalid_argument("ForecastModel: expected " + std::to_string(cfg.top_k) + " frequency bins");
        ForecastModel m;
        m.config = cfg;
        m.bins = std::move(bins);
        const auto L = cfg.lookback;
        m.embedding = Embedding::init(cfg.d_model, rng);
        m.trend_kan = build_trend_kan(L, L, cfg.trend_degree, rng);
        m.seasonal_kan = build_seasonal_kan(L, L, m.frequencies(), m.bins, rng);
        m.tf = TfSynergy::init(L, cfg.d_model, cfg.patch(), rng);
        m.head = ForecastHead::init(cfg.d_model, L, cfg.horizon, rng);
        return m;
    }

    std::vector<double> frequencies() const {
        std::vector<double> f;
        for (auto b : bins) f.push_back(2.0 * static_cast<double>(b) / static_cast<double>(config.lookback));
        return f;
    }

    /// Sum of the three branch representations, (R, d, L).
    Tensor representation(const Tensor& x, ForwardTrace* trace = nullptr) const {
        if (x.rank() != 2 || x.dim(1) != config.lookback)
            throw ShapeError("forward: expected (rows, " + std::to_string(config.lookback) + "), got " + shape_str(x.shape()));
        Tensor emb = embed(x, embedding);
        auto dec = moving_average_decompose(emb, config.kernel);
        Tensor h_trend = trend_kan.forward(permute(dec.trend, {0, 2, 1}), trace ? &trace->trend : nullptr);
        Tensor h_season = seasonal_kan.forward(permute(dec.seasonal, {0, 2, 1}), trace ? &trace->seasonal : nullptr);
        Tensor h_tf = tf.forward(dec.seasonal, trace ? &trace->tf : nullptr);
        return add(add(h_trend, h_season), h_tf);
    }

    Tensor project(const Tensor& h) const {
        const std::size_t rows = h.dim(0), L = config.lookback;
        Tensor collapsed = add(reshape(matmul(permute(h, {0, 2, 1}), head.channel_weight), {rows, L}), head.channel_bias);
        return add(matmul(collapsed, head.time_weight), head.time_bias);
    }

    /// (R, L) -> (R, F)
    Tensor forward(const Tensor& x, ForwardTrace* trace = nullptr) const { return project(representation(x, trace)); }

    std::vector<std::pair<std::string, Tensor>> named_parameters() const {
        std::vector<std::pair<std::string, Tensor>> p{{"embed.weight", embedding.weight}, {"embed.bias", embedding.bias}};
        for (auto& [n, t] : trend_kan.parameters()) p.emplace_back("trend." + n, t);
        for (auto& [n, t] : seasonal_kan.parameters()) p.emplace_back("seasonal." + n, t);
        for (auto& [n, t] : tf.parameters()) p.emplace_back("tf." + n, t);
        p.emplace_back("head.channel.weight", head.channel_weight);
        p.emplace_back("head.channel.bias", head.channel_bias);
        p.emplace_back("head.time.weight", head.time_weight);
        p.emplace_back("head.time.bias", head.time_bias);
        return p;
    }

    /// Non-trainable state: edge masks.
    std::vector<std::pair<std::string, Tensor>> named_buffers() const {
        std::vector<std::pair<std::string, Tensor>> b;
        auto masks = [&b](const std::string& prefix, const KanNetwork& net) {
            for (std::size_t k = 0; k < net.layers.size(); ++k)
                b.emplace_back(prefix + "l" + std::to_string(k) + ".mask", net.layers[k].mask);
        };
        masks("trend.", trend_kan);
        masks("seasonal.", seasonal_kan);
        for (std::size_t p = 0; p < tf.kans.size(); ++p) masks("tf.kan" + std::to_string(p) + ".", tf.kans[p]);
        return b;
    }

    std::vector<Tensor> parameters() const {
        std::vector<Tensor> out;
        for (auto& [n, t] : named_parameters()) out.push_back(t);
        return out;
    }

    /// Deep copy with independent parameter storage.
    ForecastModel clone() const {
        ForecastModel m = *this;
        m.rebind([](const std::string&, Tensor& t) { t = t.clone(); });
        return m;
    }

    /// Visits every parameter and buffer slot by name so callers can replace it.
    template <class F>
    void rebind(F&& f) {
        f("embed.weight", embedding.weight);
        f("embed.bias", embedding.bias);
        auto net = [&f](const std::string& prefix, KanNetwork& n) {
            for (std::size_t k = 0; k < n.layers.size(); ++k) {
                auto& l = n.layers[k];
                const auto pre = prefix + "l" + std::to_string(k) + ".";
                f(pre + "weight", l.weight);
                f(pre + "a0", l.a0);
                f(pre + "a1", l.a1);
                f(pre + "a2", l.a2);
                f(pre + "mask", l.mask);
                if (l.trend) f(pre + "inject.m", l.trend->m);
                if (l.seasonal) {
                    f(pre + "inject.a0", l.seasonal->a0);
                    f(pre + "inject.a", l.seasonal->a);
                    f(pre + "inject.b", l.seasonal->b);
                }
            }
        };
        net("trend.", trend_kan);
        net("seasonal.", seasonal_kan);
        f("tf.patch.weight", tf.encoder.weight);
        f("tf.patch.bias", tf.encoder.bias);
        for (std::size_t p = 0; p < tf.kans.size(); ++p) net("tf.kan" + std::to_string(p) + ".", tf.kans[p]);
        f("tf.unpatch.weight", tf.unpatcher.weight);
        f("tf.unpatch.bias", tf.unpatcher.bias);
        f("head.channel.weight", head.channel_weight);
        f("head.channel.bias", head.channel_bias);
        f("head.time.weight", head.time_weight);
        f("head.time.bias", head.time_bias);
    }

    /// The KAN networks by report name.
    std::vector<std::pair<std::string, const KanNetwork*>> networks() const {
        std::vector<std::pair<std::string, const KanNetwork*>> n{{"TrendKAN", &trend_kan}, {"SeasonalKAN", &seasonal_kan}};
        for (std::size_t p = 0; p < tf.kans.size(); ++p) n.emplace_back("TFKAN_p" + std::to_string(p), &tf.kans[p]);
        return n;
    }
    std::vector<std::pair<std::string, KanNetwork*>> networks() {
        std::vector<std::pair<std::string, KanNetwork*>> n{{"TrendKAN", &trend_kan}, {"SeasonalKAN", &seasonal_kan}};
        for (std::size_t p = 0; p < tf.kans.size(); ++p) n.emplace_back("TFKAN_p" + std::to_string(p), &tf.kans[p]);
        return n;
    }
};

// ---------------------------------------------------------------------------
// Loss

enum class Task { LongTerm, ShortTerm };

inline Task parse_task(const std::string& s) {
    if (s == "long" || s == "long-term" || s == "long_term") return Task::LongTerm;
    if (s == "short" || s == "short-term" || s == "short_term") return Task::ShortTerm;
    throw std::invalid_argument("unrecognized task '" + s + "' (expected long or short)");
}

inline std::string task_name(Task t) { return t == Task::LongTerm ? "long" : "short"; }

struct LossBreakdown {
    double pred = 0.0;
    double reg_trend = 0.0;
    double reg_seasonal = 0.0;
    double reg_tf = 0.0;
    double total = 0.0;

    double reg() const { return (reg_trend + reg_seasonal) + reg_tf; }
};

struct LossTerms {
    Tensor total;
    LossBreakdown values;
};

inline Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) throw ShapeError("mse_loss", pred.shape(), target.shape());
    return mean(square(sub(pred, target)));
}

/// Mean over points of 200 |p - t| / (|p| + |t|), with 0/0 terms as 0.
inline Tensor smape_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) throw ShapeError("smape_loss", pred.shape(), target.shape());
    return scale(mean(div_or_zero(abs(sub(pred, target)), add(abs(pred), abs(target)))), 200.0);
}

/// Maps standardized rows back to the data scale: x * std + mean.
struct RowScale {
    Tensor stdev;  // same shape as the forecasts
    Tensor mean;

    Tensor apply(const Tensor& x) const { return add(mul(x, stdev), mean); }
};

/// pred + lambda * (reg_trend + reg_seasonal + reg_tf). Short-term prediction
/// loss is sMAPE, taken on the data scale when `scale` is given.
inline LossTerms total_loss(const Tensor& pred, const Tensor& target, const ForecastModel& model, double lambda, Task task,
                            const std::optional<RowScale>& scale_back = std::nullopt) {
    if (pred.shape() != target.shape()) throw ShapeError("total_loss", pred.shape(), target.shape());
    Tensor p;
    if (task == Task::LongTerm) {
        p = mse_loss(pred, target);
    } else {
        p = scale_back ? smape_loss(scale_back->apply(pred), scale_back->apply(target)) : smape_loss(pred, target);
    }
    Tensor rt = reg_loss(model.trend_kan);
    Tensor rs = reg_loss(model.seasonal_kan);
    Tensor rtf = Tensor::scalar(0.0);
    for (const auto& k : model.tf.kans) rtf = add(rtf, reg_loss(k));
    Tensor total = add(p, scale(add(add(rt, rs), rtf), lambda));

    LossBreakdown b;
    b.pred = p.item();
    b.reg_trend = rt.item();
    b.reg_seasonal = rs.item();
    b.reg_tf = rtf.item();
    b.total = total.item();
    return {total, b};
}

}  // namespace itfkan
