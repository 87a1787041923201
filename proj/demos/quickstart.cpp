// End-to-end tour of the library API: synthetic data, training, test
// metrics, pruning and symbolic formulas for the strongest edges.

#include <cmath>
#include <cstdio>
#include <iostream>

#include "itfkan/interpret.hpp"
#include "itfkan/train.hpp"

using namespace itfkan;

int main() {
    // Two hourly variates: a daily cycle with drift, and a 12-hour cycle.
    SeriesDataset ds;
    ds.name = "tour";
    ds.variates = {"daily", "half_day"};
    Rng noise(3);
    for (std::size_t t = 0; t < 1500; ++t) {
        const double h = static_cast<double>(t);
        ds.values.push_back(std::sin(2.0 * M_PI * h / 24.0) + 0.001 * h + noise.uniform(-0.1, 0.1));
        ds.values.push_back(0.5 * std::cos(2.0 * M_PI * h / 12.0) + noise.uniform(-0.1, 0.1));
    }

    ModelConfig cfg;
    cfg.lookback = 48;
    cfg.horizon = 12;
    cfg.d_model = 4;
    cfg.kernel = 13;
    cfg.trend_degree = 2;
    cfg.top_k = 3;
    cfg.patch_len = 8;
    cfg.stride = 8;
    cfg.batch_size = 32;
    cfg.learning_rate = 0.005;
    cfg.epochs = 4;
    cfg.validate();

    auto data = prepare(ds, cfg.lookback, cfg.horizon, SplitRule::Ratio);
    auto model = build_model(cfg, data.train, 42);
    std::cout << "selected frequency bins:";
    for (auto b : model.bins) std::cout << " " << b;
    std::cout << "\n";

    auto opt = TrainOptions::from(cfg, Task::LongTerm, 42);
    auto result = train(model, data.train, data.val, opt, &data.stats, [](const EpochRecord& r) {
        std::printf("epoch %zu  train %.4f  val %.4f  reg %.3f\n", r.epoch, r.train_pred, r.val_pred, r.reg);
    });
    std::printf("best epoch %zu\n\n", result.best_epoch);
    std::cout << format_metrics(evaluate(model, data.test, data.stats, Task::LongTerm, 24)) << "\n";

    const auto pruned = prune(model, 5e-4);
    std::cout << render_prune_report(pruned) << "\n";

    ForwardTrace trace;
    {
        NoGradGuard guard;
        model.forward(as_rows(data.train.range_batch(0, std::min<std::size_t>(128, data.train.size())).inputs), &trace);
    }
    ReportOptions ro;
    auto rep = symbolify_model(model, &trace, ro);
    std::cout << "strongest edges per network:\n";
    for (const auto& e : rep.edges)
        if (e.highlight)
            std::printf("  %-12s layer %zu  %3zu -> %3zu  %-40s  R2 %.4f\n", e.network.c_str(), e.layer, e.i, e.j,
                        render_formula(e.fit).c_str(), e.fit.r2);
    return 0;
}
