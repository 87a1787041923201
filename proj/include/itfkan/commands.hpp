#pragma once

// Command implementations behind the itfkan tool: train, eval, prune,
// symbolify and report. Each returns a process exit code: 0 success,
// 1 runtime failure, 2 usage or config error. No output carries a timestamp,
// so identical inputs give byte-identical files.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "itfkan/checkpoint.hpp"
#include "itfkan/config.hpp"
#include "itfkan/data.hpp"
#include "itfkan/interpret.hpp"
#include "itfkan/train.hpp"

namespace itfkan {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

/// Command-line values; unset fields fall back to the config or checkpoint.
struct CommandArgs {
    std::optional<std::string> config;
    std::optional<std::string> checkpoint;
    std::optional<std::string> dataset;
    std::optional<std::string> out;
    std::optional<double> tau;
    std::optional<std::size_t> top_m;
    std::optional<std::size_t> horizon;
    std::optional<std::uint64_t> seed;
};

inline constexpr double kDefaultTau = 5e-4;
inline constexpr std::size_t kDefaultTopM = 3;
inline constexpr std::size_t kTraceWindows = 256;

/// Files written by one command; removed again unless the command commits.
class ArtifactSet {
public:
    explicit ArtifactSet(std::filesystem::path dir) : dir_(std::move(dir)) {}
    ArtifactSet(const ArtifactSet&) = delete;
    ArtifactSet& operator=(const ArtifactSet&) = delete;
    ~ArtifactSet() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& p : written_) {
            std::filesystem::remove(p, ec);
            std::filesystem::remove(p.string() + ".tmp", ec);
        }
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void write(const std::string& file, const std::string& bytes) {
        written_.emplace_back(file);
        write_file_atomic(file, bytes);
    }
    void commit() { committed_ = true; }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> written_;
    bool committed_ = false;
};

namespace detail {

/// Checkpoint config lines that are not RunConfig keys.
inline constexpr const char* kVariatesKey = "variates";

inline const std::vector<std::string>& model_keys() {
    static const std::vector<std::string> keys = {"lookback", "horizon", "d_model", "kernel", "trend_degree", "top_k",
                                                  "patch_len", "stride",  "lambda",  "learning_rate", "batch_size",
                                                  "epochs",    "patience"};
    return keys;
}

inline SeriesDataset load_dataset(const RunConfig& c) {
    CsvSchema schema;
    schema.timestamp_column = c.timestamp_column;
    schema.frequency = c.frequency;
    auto ds = ingest_csv(c.dataset, schema);
    ds.name = c.dataset_name();
    return ds;
}

inline std::string render_history(const std::vector<EpochRecord>& history) {
    std::string out = "epoch\ttrain_pred\tval_pred\treg\ttotal\n";
    char buf[256];
    for (const auto& h : history) {
        std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\t%.17g\t%.17g\n", h.epoch, h.train_pred, h.val_pred, h.reg, h.total);
        out += buf;
    }
    return out;
}

inline std::string render_stats(const Standardizer& s) {
    std::string out;
    char buf[128];
    for (std::size_t c = 0; c < s.width(); ++c) {
        std::snprintf(buf, sizeof buf, "\t%.17g\t%.17g\n", s.mean[c], s.stdev[c]);
        out += s.variates[c] + buf;
    }
    return out;
}

struct LoadedCheckpoint {
    RunConfig config;
    std::size_t variates = 0;
    ForecastModel model;
};

inline LoadedCheckpoint open_checkpoint(const std::string& path) {
    auto ck = load_checkpoint(path);
    ConfigLines pairs;
    std::size_t variates = 0;
    for (const auto& [k, v] : ck.config) {
        if (k == kVariatesKey) variates = parse_number<std::size_t>(k, v);
        else pairs.emplace_back(k, v);
    }
    RunConfig cfg = config_from_pairs(pairs, path);
    return {cfg, variates, restore_model(ck, cfg.model)};
}

/// Resolves the checkpoint path from --checkpoint or the config's.
inline std::string checkpoint_arg(const CommandArgs& a, const char* command) {
    if (a.checkpoint) return *a.checkpoint;
    if (a.config) return load_config(*a.config).checkpoint_path();
    throw ConfigError(std::string(command) + " needs --checkpoint (or --config naming one)");
}

/// Model fields of `given` must equal those of the checkpoint.
inline void check_compatible(const RunConfig& stored, const RunConfig& given) {
    const auto a = config_lines(stored), b = config_lines(given);
    for (std::size_t k = 0; k < a.size(); ++k) {
        const auto& key = a[k].first;
        if (std::find(model_keys().begin(), model_keys().end(), key) == model_keys().end()) continue;
        if (a[k].second != b[k].second)
            throw ConfigError("config does not match checkpoint: '" + key + "' is " + b[k].second + ", checkpoint has " + a[k].second);
    }
}

inline void check_variates(std::size_t expected, const SeriesDataset& ds) {
    if (expected != 0 && ds.width() != expected)
        throw ConfigError("dataset does not match checkpoint: 'variates' is " + std::to_string(ds.width()) + ", checkpoint has " +
                          std::to_string(expected));
}

/// Runs the model over evenly spaced training windows to record node ranges.
inline ForwardTrace trace_ranges(const ForecastModel& model, const WindowSet& train_set) {
    ForwardTrace trace;
    if (train_set.empty()) return trace;
    const std::size_t count = std::min(kTraceWindows, train_set.size());
    std::vector<std::size_t> idx(count);
    for (std::size_t k = 0; k < count; ++k) idx[k] = k * train_set.size() / count;
    NoGradGuard guard;
    model.forward(as_rows(train_set.batch(idx).inputs), &trace);
    return trace;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace detail

/// Trains from a config file. Writes the checkpoint, stats.tsv, history.tsv,
/// metrics.txt and config.txt; echoes the resolved config and test metrics.
inline int cmd_train(const CommandArgs& a, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        if (!a.config) throw ConfigError("train needs --config");
        RunConfig cfg = load_config(*a.config);
        if (a.seed) cfg.seed = *a.seed;
        if (a.out) cfg.out = *a.out;
        if (a.dataset) cfg.dataset = *a.dataset;
        if (a.checkpoint) cfg.checkpoint = *a.checkpoint;
        cfg.validate();
        const std::string resolved = serialize_config(cfg);
        out << "# resolved config\n" << resolved << std::flush;

        const auto ds = detail::load_dataset(cfg);
        const auto data = prepare(ds, cfg.model.lookback, cfg.model.horizon, cfg.split_rule());
        auto model = build_model(cfg.model, data.train, cfg.seed);
        auto opt = TrainOptions::from(cfg.model, cfg.task, cfg.seed);
        opt.max_steps = cfg.max_steps;
        auto result = train(model, data.train, data.val, opt, &data.stats, [&](const EpochRecord& r) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "epoch %zu train=%.6f val=%.6f reg=%.6f\n", r.epoch, r.train_pred, r.val_pred, r.reg);
            err << buf << std::flush;
        });
        const auto m = evaluate(model, data.test, data.stats, cfg.task, seasonal_period(cfg.frequency));

        ArtifactSet files(cfg.out);
        auto lines = config_lines(cfg);
        lines.emplace_back(detail::kVariatesKey, std::to_string(ds.width()));
        files.write(cfg.checkpoint_path(), encode_checkpoint(make_checkpoint(model, lines)));
        files.write(files.path("stats.tsv"), detail::render_stats(data.stats));
        files.write(files.path("history.tsv"), detail::render_history(result.history));
        files.write(files.path("metrics.txt"), format_metrics(m));
        files.write(files.path("config.txt"), resolved);
        files.commit();
        out << "# test metrics (best epoch " << result.best_epoch << ")\n" << format_metrics(m);
        return kExitOk;
    });
}

/// Test-split metrics of a checkpoint, printed as key=value lines.
inline int cmd_eval(const CommandArgs& a, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        auto ck = detail::open_checkpoint(detail::checkpoint_arg(a, "eval"));
        RunConfig cfg = ck.config;
        if (a.config) {
            RunConfig given = load_config(*a.config);
            detail::check_compatible(ck.config, given);
            cfg.dataset = given.dataset;
            cfg.name = given.name;
            cfg.frequency = given.frequency;
            cfg.split = given.split;
            cfg.timestamp_column = given.timestamp_column;
            cfg.task = given.task;
        }
        if (a.dataset) cfg.dataset = *a.dataset;
        if (a.horizon && *a.horizon != cfg.model.horizon)
            throw ConfigError("horizon " + std::to_string(*a.horizon) + " does not match the checkpoint's horizon " +
                              std::to_string(cfg.model.horizon));
        cfg.validate();
        const auto ds = detail::load_dataset(cfg);
        detail::check_variates(ck.variates, ds);
        const auto data = prepare(ds, cfg.model.lookback, cfg.model.horizon, cfg.split_rule());
        const auto text = format_metrics(evaluate(ck.model, data.test, data.stats, cfg.task, seasonal_period(cfg.frequency)));
        if (a.out) {
            ArtifactSet files(*a.out);
            files.write(files.path("eval_metrics.txt"), text);
            files.commit();
        }
        out << text;
        return kExitOk;
    });
}

struct InterpretOutputs {
    bool prune_files = false;
    bool symbolic_files = false;
};

namespace detail {

inline int interpret_command(const CommandArgs& a, std::ostream& out, std::ostream& err, const char* name, InterpretOutputs what) {
    return guarded(err, [&] {
        const double tau = a.tau.value_or(kDefaultTau);
        if (!(tau >= 0.0)) throw ConfigError("--tau must be >= 0");
        auto ck = open_checkpoint(checkpoint_arg(a, name));
        RunConfig cfg = ck.config;
        if (a.dataset) cfg.dataset = *a.dataset;
        ArtifactSet files(a.out.value_or(cfg.out));

        const auto report = itfkan::prune(ck.model, tau);
        const auto prune_text = render_prune_report(report);
        if (what.prune_files) {
            files.write(files.path("prune_report.txt"), prune_text);
            auto lines = config_lines(ck.config);
            lines.emplace_back(kVariatesKey, std::to_string(ck.variates));
            files.write(files.path("pruned.ckpt"), encode_checkpoint(make_checkpoint(ck.model, lines)));
            out << prune_text;
        }
        if (what.symbolic_files) {
            const auto ds = load_dataset(cfg);
            check_variates(ck.variates, ds);
            const auto data = prepare(ds, cfg.model.lookback, cfg.model.horizon, cfg.split_rule());
            const auto trace = trace_ranges(ck.model, data.train);
            ReportOptions opt;
            opt.tau = tau;
            opt.top_m = a.top_m.value_or(kDefaultTopM);
            const auto rep = symbolify_model(ck.model, &trace, opt);
            files.write(files.path("symbolic_report.txt"), render_symbolic_report(rep));
            files.write(files.path("edges.tsv"), render_edge_table(rep.edges));
            files.write(files.path("graph.tsv"), render_graph(rep));
            out << "symbolified " << rep.taylor_rows() << " preserved edges and " << rep.edges.size() - rep.taylor_rows()
                << " injected edges\n";
        }
        files.commit();
        return kExitOk;
    });
}

}  // namespace detail

/// Prunes at --tau; writes prune_report.txt and pruned.ckpt.
inline int cmd_prune(const CommandArgs& a, std::ostream& out, std::ostream& err) {
    return detail::interpret_command(a, out, err, "prune", {true, false});
}

/// Prunes at --tau, then symbolifies the survivors; writes
/// symbolic_report.txt, edges.tsv and graph.tsv.
inline int cmd_symbolify(const CommandArgs& a, std::ostream& out, std::ostream& err) {
    return detail::interpret_command(a, out, err, "symbolify", {false, true});
}

/// prune and symbolify together.
inline int cmd_report(const CommandArgs& a, std::ostream& out, std::ostream& err) {
    return detail::interpret_command(a, out, err, "report", {true, true});
}

inline int run_command(const std::string& name, const CommandArgs& a, std::ostream& out, std::ostream& err) {
    if (name == "train") return cmd_train(a, out, err);
    if (name == "eval") return cmd_eval(a, out, err);
    if (name == "prune") return cmd_prune(a, out, err);
    if (name == "symbolify") return cmd_symbolify(a, out, err);
    if (name == "report") return cmd_report(a, out, err);
    err << "error: unknown command '" << name << "'\n";
    return kExitUsage;
}

}  // namespace itfkan
