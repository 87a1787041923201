// itfkan: train, evaluate and interpret forecasting models from the shell.
//
//   itfkan train     --config run.cfg [--seed N] [--out DIR]
//   itfkan eval      --checkpoint model.ckpt [--dataset data.csv] [--horizon F]
//   itfkan prune     --checkpoint model.ckpt [--tau 5e-4] [--out DIR]
//   itfkan symbolify --checkpoint model.ckpt [--tau 5e-4] [--top-m 3] [--out DIR]
//   itfkan report    --checkpoint model.ckpt [--tau 5e-4] [--top-m 3] [--out DIR]

#include <iostream>

#include <CLI11.hpp>

#include "itfkan/commands.hpp"

namespace {

struct Flags {
    std::string config, checkpoint, dataset, out;
    double tau = itfkan::kDefaultTau;
    std::size_t top_m = itfkan::kDefaultTopM;
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"iTFKAN time-series forecasting: train, eval, prune, symbolify, report"};
    app.require_subcommand(1);
    Flags f;

    auto config = [&](CLI::App* s) { return s->add_option("--config", f.config, "run configuration file")->check(CLI::ExistingFile); };
    auto checkpoint = [&](CLI::App* s) { return s->add_option("--checkpoint", f.checkpoint, "model checkpoint"); };
    auto dataset = [&](CLI::App* s) { return s->add_option("--dataset", f.dataset, "CSV dataset (overrides the configured path)"); };
    auto out = [&](CLI::App* s) { return s->add_option("--out", f.out, "output directory"); };
    auto tau = [&](CLI::App* s) { return s->add_option("--tau", f.tau, "pruning threshold on edge L2 norms")->capture_default_str(); };
    auto top_m = [&](CLI::App* s) { return s->add_option("--top-m", f.top_m, "edges highlighted per network")->capture_default_str(); };

    auto* train = app.add_subcommand("train", "train a model from a config file");
    config(train)->required();
    auto* seed_opt = train->add_option("--seed", f.seed, "override the configured seed");
    auto* train_out = out(train);
    auto* train_data = dataset(train);
    auto* train_ckpt = checkpoint(train);

    auto* eval = app.add_subcommand("eval", "test-split metrics of a checkpoint");
    auto* eval_cfg = config(eval);
    auto* eval_ckpt = checkpoint(eval);
    auto* eval_data = dataset(eval);
    auto* horizon_opt = eval->add_option("--horizon", f.horizon, "expected forecast horizon");
    auto* eval_out = out(eval);

    struct Interp {
        CLI::App* app;
        CLI::Option *config, *checkpoint, *dataset, *out, *tau, *top_m;
    };
    std::vector<Interp> interp;
    for (const char* name : {"prune", "symbolify", "report"}) {
        auto* s = app.add_subcommand(name, std::string(name) == "prune"       ? "prune edges below --tau"
                                           : std::string(name) == "symbolify" ? "prune, then fit symbolic formulas to surviving edges"
                                                                               : "prune and symbolify, writing every report file");
        Interp i{s, config(s), checkpoint(s), dataset(s), out(s), tau(s), nullptr};
        if (std::string(name) != "prune") i.top_m = top_m(s);
        interp.push_back(i);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? itfkan::kExitOk : itfkan::kExitUsage;
    }

    auto set = [](CLI::Option* o, const std::string& v, std::optional<std::string>& dst) {
        if (o && o->count()) dst = v;
    };
    itfkan::CommandArgs a;
    auto* cmd = app.get_subcommands().front();
    if (cmd == train) {
        a.config = f.config;
        if (seed_opt->count()) a.seed = f.seed;
        set(train_out, f.out, a.out);
        set(train_data, f.dataset, a.dataset);
        set(train_ckpt, f.checkpoint, a.checkpoint);
    } else if (cmd == eval) {
        set(eval_cfg, f.config, a.config);
        set(eval_ckpt, f.checkpoint, a.checkpoint);
        set(eval_data, f.dataset, a.dataset);
        set(eval_out, f.out, a.out);
        if (horizon_opt->count()) a.horizon = f.horizon;
    } else {
        for (const auto& i : interp) {
            if (i.app != cmd) continue;
            set(i.config, f.config, a.config);
            set(i.checkpoint, f.checkpoint, a.checkpoint);
            set(i.dataset, f.dataset, a.dataset);
            set(i.out, f.out, a.out);
            a.tau = f.tau;
            if (i.top_m) a.top_m = f.top_m;
        }
    }
    return itfkan::run_command(cmd->get_name(), a, std::cout, std::cerr);
}
