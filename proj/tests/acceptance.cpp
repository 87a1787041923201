// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "disguise.hpp"
#include "itfkan/commands.hpp"
#include "itfkan/gradcheck.hpp"
#include "itfkan/interpret.hpp"
#include "itfkan/train.hpp"

using namespace itfkan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

ModelConfig tiny_config() {
    ModelConfig c;
    c.lookback = 8;
    c.horizon = 4;
    c.d_model = 2;
    c.kernel = 3;
    c.trend_degree = 2;
    c.top_k = 2;
    c.patch_len = 4;
    c.stride = 2;
    return c;
}

// 1. Central finite differences over every parameter group of a tiny model.
Outcome gradient_correctness() {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        auto model = ForecastModel::build(tiny_config(), {1, 3}, rng);
        Tensor x = rng.uniform_tensor({3, 8}, -1.0, 1.0, false);
        Tensor y = rng.uniform_tensor({3, 4}, -1.0, 1.0, false);
        auto loss = [&] { return total_loss(model.forward(x), y, model, 0.01, Task::LongTerm).total; };
        worst = std::max(worst, gradient_check(loss, model.parameters(), 1e-5));
    }
    return {worst < 1e-4, "max relative error " + fmt("%.3e", worst) + " over 5 seeds"};
}

// 2. Layer edge totals of the ETTh1-shaped model.
Outcome structural_parity() {
    ModelConfig c;  // L=96, d=32, p=3, K=5, P=S=6
    Rng rng(0);
    auto m = ForecastModel::build(c, {4, 8, 12, 16, 20}, rng);
    auto rep = prune_report(m);
    const auto& t0 = m.trend_kan.layers[0];
    const auto& s0 = m.seasonal_kan.layers[0];
    const std::vector<std::size_t> got = {t0.total_edges(),           rep.rows[0].total, m.trend_kan.layers[1].total_edges(),
                                          s0.total_edges(),           rep.rows[2].total, m.seasonal_kan.layers[1].total_edges(),
                                          rep.rows[4].total};
    const std::vector<std::size_t> want = {9216, 8928, 9216, 9216, 8736, 9216, 1377};
    std::string d;
    for (auto v : got) d += (d.empty() ? "" : "/") + std::to_string(v);
    return {got == want, "edges " + d};
}

// 3. trend + seasonal == embedded input.
Outcome decomposition_identity() {
    Rng rng(3);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.index(3), l = 4 + rng.index(60), d = 1 + rng.index(8);
        const std::size_t kernel = 1 + 2 * rng.index((l + 1) / 2);
        auto e = Embedding::init(d, rng);
        auto z = embed(rng.uniform_tensor({n, l}, -10.0, 10.0, false), e);
        auto r = moving_average_decompose(z, kernel);
        for (std::size_t k = 0; k < z.numel(); ++k)
            worst = std::max(worst, std::abs(r.trend.data()[k] + r.seasonal.data()[k] - z.data()[k]));
    }
    return {worst <= 1e-12, "max |trend + seasonal - x| " + fmt("%.3e", worst) + " over 1000 inputs"};
}

// 4. DFT against a naive sum, and single-tone reconstruction through the TF grid.
Outcome spectral_correctness() {
    Rng rng(4);
    double dft_gap = 0.0, rec_gap = 0.0;
    for (std::size_t P : {2u, 4u, 8u, 17u}) {
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> v(P);
            for (auto& x : v) x = rng.uniform(-2.0, 2.0);
            auto spec = dft_patches(Tensor({1, P, 1}, v));
            for (std::size_t k = 0; k < spectrum_bins(P); ++k) {
                std::complex<double> f = 0.0;
                for (std::size_t p = 1; p <= P; ++p)  // patch index runs 1..P
                    f += v[p - 1] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k * p) / static_cast<double>(P));
                dft_gap = std::max(dft_gap, std::abs(std::polar(spec.amplitude.data()[k], spec.phase.data()[k]) - f));
            }
        }
        for (std::size_t tone = 0; tone < spectrum_bins(P); ++tone) {
            std::vector<double> v(P);
            for (std::size_t p = 0; p < P; ++p)
                v[p] = 1.3 * std::cos(2.0 * M_PI * static_cast<double>(tone * p) / static_cast<double>(P) + 0.4) + 0.2;
            auto back = tf_reconstruct(tf_expand(dft_patches(Tensor({1, P, 1}, v)), P));
            for (std::size_t p = 0; p < P; ++p) rec_gap = std::max(rec_gap, std::abs(back.data()[p] - v[p]));
        }
    }
    return {dft_gap <= 1e-9 && rec_gap <= 1e-9, "dft gap " + fmt("%.2e", dft_gap) + ", reconstruction gap " + fmt("%.2e", rec_gap)};
}

// 5. A tiny model overfits sin(2 pi t / 24) + 0.1 t / L.
Outcome overfit_sanity() {
    const std::size_t L = 48, F = 24, T = 400;
    SeriesDataset ds;
    ds.name = "synthetic";
    ds.variates = {"y"};
    for (std::size_t t = 0; t < T; ++t) ds.values.push_back(std::sin(2.0 * M_PI * static_cast<double>(t) / 24.0) + 0.1 * static_cast<double>(t) / L);
    auto data = prepare(ds, L, F, SplitRule::Ratio);
    ModelConfig c;
    c.lookback = L;
    c.horizon = F;
    c.d_model = 4;
    c.kernel = 13;
    c.trend_degree = 2;
    c.top_k = 2;
    c.patch_len = 8;
    c.stride = 8;
    c.batch_size = 32;
    c.learning_rate = 1e-3;
    auto model = build_model(c, data.train, 5);
    auto opt = TrainOptions::from(c, Task::LongTerm, 5);
    opt.epochs = 1000000;
    opt.patience = opt.epochs;
    opt.max_steps = 2000;
    auto r = train(model, data.train, WindowSet(), opt);
    const double loss = prediction_loss(model, data.train, Task::LongTerm, nullptr, 256);
    return {loss < 1e-2 && r.steps <= 2000,
            "train prediction loss " + fmt("%.3e", loss) + " after " + std::to_string(r.steps) + " Adam steps"};
}

// 6. Family recovery under random affine disguise.
Outcome symbolic_recovery() {
    Rng rng(2024);
    std::size_t fails = 0, equivalent = 0, total = 0;
    std::string failed;
    for (auto fam : kAllFamilies)
        for (int trial = 0; trial < 20; ++trial) {
            auto g = fixtures::random_disguise(fam, rng);
            auto out = fixtures::check_recovery(g);
            ++total;
            if (!out.pass()) {
                ++fails;
                failed += std::string(" ") + family_name(fam);
            }
            equivalent += out.pass() && out.equivalent;
        }
    return {fails == 0, std::to_string(total - fails) + "/" + std::to_string(total) + " recovered (" + std::to_string(equivalent) +
                            " as the identical sin/cos twin)" + (failed.empty() ? "" : "; failed:" + failed)};
}

// 7. Pruning: monotone, exhaustive at the extremes, masks equal zeroed parameters.
Outcome pruning_properties() {
    Rng rng(7);
    ModelConfig c = tiny_config();
    c.lookback = 24;
    c.kernel = 5;
    c.patch_len = 6;
    c.stride = 6;
    auto base = ForecastModel::build(c, {1, 4}, rng);
    bool ok = true;
    std::size_t previous = SIZE_MAX;
    std::string counts;
    for (double tau : {0.0, 1e-6, 1e-4, 1e-2, HUGE_VAL}) {
        auto m = base.clone();
        const auto rep = prune(m, tau);
        const auto kept = rep.preserved();
        counts += (counts.empty() ? "" : "/") + std::to_string(kept);
        ok = ok && kept <= previous;
        previous = kept;
        for (const auto& row : rep.rows) {
            if (tau == 0.0) ok = ok && row.preserved == row.total;
            if (std::isinf(tau)) ok = ok && row.preserved == 0;
        }
    }
    // Masked forward against a copy whose pruned edges are zeroed in place.
    auto masked = base.clone(), zeroed = base.clone();
    prune(masked, 1e-2);
    auto mn = masked.networks(), zn = zeroed.networks();
    for (std::size_t n = 0; n < mn.size(); ++n)
        for (std::size_t k = 0; k < mn[n].second->layers.size(); ++k) {
            const auto& ml = mn[n].second->layers[k];
            auto& zl = zn[n].second->layers[k];
            for (std::size_t s = 0; s < ml.total_edges(); ++s)
                if (ml.mask.data()[s] == 0.0 && !ml.fixed[s]) zl.weight.data()[s] = zl.a0.data()[s] = zl.a1.data()[s] = zl.a2.data()[s] = 0.0;
        }
    Tensor x = Rng(8).uniform_tensor({5, c.lookback}, -2.0, 2.0, false);
    const bool bitwise = masked.forward(x).values() == zeroed.forward(x).values();
    return {ok && bitwise, "preserved " + counts + " over tau 0..inf; masked forward " + (bitwise ? "bitwise equal" : "DIFFERS")};
}

// 8. Hand-computed metric values and OWA of naive2 against itself.
Outcome metric_oracles() {
    bool ok = true;
    // forecast (2, 4), truth (1, 2): sMAPE = 100/2 * (2*1/3 + 2*2/6) = 66.666667
    // history (0,1,0,1) with m=1: scale 1; MAE = 1.5 -> MASE 1.5
    auto m = metrics({2, 4}, {1, 2}, {0, 1, 0, 1}, 1);
    ok = ok && fmt("%.6f", m.smape) == "66.666667" && fmt("%.6f", m.mase) == "1.500000";
    // seasonal m=2: history (1,3,2,4,3,5) -> scale mean(|2-1|,|4-3|,|3-2|,|5-4|) = 1
    auto s = metrics({5, 6}, {4, 6}, {1, 3, 2, 4, 3, 5}, 2);
    ok = ok && fmt("%.6f", s.smape) == "11.111111" && fmt("%.6f", s.mase) == "0.500000";
    ok = ok && format_metrics(m).rfind("mse=2.500000\n", 0) == 0;
    bool owa_one = true;
    Rng rng(9);
    for (std::size_t period : {1u, 4u, 12u}) {
        std::vector<double> h(72), y(8);
        for (std::size_t t = 0; t < h.size(); ++t)
            h[t] = 20.0 + 3.0 * std::sin(2.0 * M_PI * static_cast<double>(t) / static_cast<double>(period)) + rng.uniform(0.0, 1.0);
        for (auto& v : y) v = 20.0 + rng.uniform(-3.0, 3.0);
        const auto ref = naive2_forecast(h, y.size(), period);
        const auto r = metrics(ref, y, h, period, &ref);
        owa_one = owa_one && r.owa && *r.owa == 1.0;
    }
    return {ok && owa_one, "smape=" + fmt("%.6f", m.smape) + " mase=" + fmt("%.6f", m.mase) + " seasonal smape=" + fmt("%.6f", s.smape) +
                               " mase=" + fmt("%.6f", s.mase) + "; owa(naive2, naive2) " + (owa_one ? "== 1" : "!= 1")};
}

// 10. Two train runs with one config and seed give identical bytes.
Outcome determinism() {
    const auto dir = fs::temp_directory_path() / "itfkan_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream csv(dir / "wave.csv", std::ios::binary);
        csv << "date,a,b\n";
        for (int t = 0; t < 300; ++t)
            csv << t << "," << 3.0 + std::sin(2.0 * M_PI * t / 12.0) << "," << std::cos(2.0 * M_PI * t / 8.0) + 0.01 * t << "\n";
    }
    const auto cfg = (dir / "run.cfg").string();
    {
        std::ofstream out(cfg, std::ios::binary);
        out << "dataset = " << (dir / "wave.csv").string() << "\nlookback = 24\nhorizon = 8\nd_model = 4\nkernel = 5\n"
            << "trend_degree = 2\ntop_k = 2\npatch_len = 6\nstride = 6\nbatch_size = 16\nepochs = 3\nseed = 11\n";
    }
    std::string bytes[2][2];
    for (int run = 0; run < 2; ++run) {
        CommandArgs a;
        a.config = cfg;
        a.out = (dir / ("run" + std::to_string(run))).string();
        std::ostringstream out, err;
        if (cmd_train(a, out, err) != 0) return {false, "train failed: " + err.str()};
        bytes[run][0] = read_file((dir / ("run" + std::to_string(run)) / "history.tsv").string());
        auto ck = load_checkpoint((dir / ("run" + std::to_string(run)) / "model.ckpt").string());
        ck.config.clear();  // the config block names the run's own output directory
        bytes[run][1] = encode_checkpoint(ck);
    }
    fs::remove_all(dir);
    const bool history = bytes[0][0] == bytes[1][0], payload = bytes[0][1] == bytes[1][1];
    return {history && payload, std::string("history ") + (history ? "identical" : "DIFFERS") + ", checkpoint payload " +
                                    (payload ? "identical" : "DIFFERS") + " (" + std::to_string(bytes[0][1].size()) + " bytes)"};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"1 gradient correctness", gradient_correctness},
        {"2 structural parity", structural_parity},
        {"3 decomposition identity", decomposition_identity},
        {"4 spectral correctness", spectral_correctness},
        {"5 overfit sanity", overfit_sanity},
        {"6 symbolification recovery", symbolic_recovery},
        {"7 pruning properties", pruning_properties},
        {"8 metric oracles", metric_oracles},
        {"10 determinism", determinism},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %-28s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
