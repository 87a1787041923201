#pragma once

// Run configuration: every model hyperparameter plus the data, task and
// artifact settings of one command. Text form is one "key = value" per line;
// '#' starts a comment. Unknown or repeated keys are errors.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "itfkan/checkpoint.hpp"
#include "itfkan/data.hpp"
#include "itfkan/metrics.hpp"
#include "itfkan/model.hpp"

namespace itfkan {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    ModelConfig model;
    std::string dataset;             // CSV path (required)
    std::string name;                // dataset name; empty: file stem
    std::string frequency = "hourly";
    std::string split = "auto";      // auto | ratio | ett_hourly | ett_minute
    bool timestamp_column = true;
    Task task = Task::LongTerm;
    std::uint64_t seed = 2024;
    std::size_t max_steps = 0;       // 0: no limit
    std::string out = "itfkan_out";
    std::string checkpoint;          // empty: <out>/model.ckpt

    bool operator==(const RunConfig&) const = default;

    std::string dataset_name() const { return name.empty() ? std::filesystem::path(dataset).stem().string() : name; }
    std::string checkpoint_path() const {
        return checkpoint.empty() ? (std::filesystem::path(out) / "model.ckpt").string() : checkpoint;
    }
    SplitRule split_rule() const {
        if (split == "auto") return split_rule_for(dataset_name());
        if (split == "ratio") return SplitRule::Ratio;
        if (split == "ett_hourly") return SplitRule::EttHourly;
        if (split == "ett_minute") return SplitRule::EttMinute;
        throw ConfigError("split must be auto, ratio, ett_hourly or ett_minute, got '" + split + "'");
    }

    void validate() const {
        if (dataset.empty()) throw ConfigError("missing required key 'dataset'");
        if (out.empty()) throw ConfigError("key 'out' must not be empty");
        split_rule();
        try {
            seasonal_period(frequency);
            model.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
};

/// Named hyperparameter sets for known benchmark datasets.
inline void apply_preset(RunConfig& c, const std::string& preset) {
    if (preset == "ETTh1") {
        c.model = ModelConfig{};
        c.model.lookback = 96;
        c.model.horizon = 96;
        c.model.d_model = 32;
        c.model.batch_size = 64;
        c.model.learning_rate = 0.0005;
        c.model.stride = 6;
        c.model.patch_len = 6;
        c.model.trend_degree = 3;
        c.model.top_k = 5;
        c.model.lambda = 0.01;
        c.name = "ETTh1";
        c.frequency = "hourly";
        c.task = Task::LongTerm;
        return;
    }
    throw ConfigError("unknown preset '" + preset + "' (available: ETTh1)");
}

namespace detail {

/// Shortest round-trip text; plain decimals ("0.0005") in the usual range.
inline std::string format_double(double v) {
    char buf[400];
    const double m = std::abs(v);
    const bool plain = v == 0.0 || (m >= 1e-6 && m < 1e15);
    auto r = plain ? std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed) : std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const char* end = text.data() + text.size();
    auto r = std::from_chars(text.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end || text.empty())
        throw ConfigError("key '" + key + "': cannot parse '" + text + "' as a number");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + text + "'");
}

struct ConfigKey {
    const char* name;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

inline ConfigKey size_key(const char* name, std::size_t ModelConfig::*field) {
    return {name, [field](const RunConfig& c) { return std::to_string(c.model.*field); },
            [name, field](RunConfig& c, const std::string& v) { c.model.*field = parse_number<std::size_t>(name, v); }};
}

inline ConfigKey double_key(const char* name, double ModelConfig::*field) {
    return {name, [field](const RunConfig& c) { return format_double(c.model.*field); },
            [name, field](RunConfig& c, const std::string& v) { c.model.*field = parse_number<double>(name, v); }};
}

inline ConfigKey string_key(const char* name, std::string RunConfig::*field) {
    return {name, [field](const RunConfig& c) { return c.*field; }, [field](RunConfig& c, const std::string& v) { c.*field = v; }};
}

/// Keys in their canonical (serialization) order.
inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        string_key("dataset", &RunConfig::dataset),
        string_key("name", &RunConfig::name),
        string_key("frequency", &RunConfig::frequency),
        string_key("split", &RunConfig::split),
        {"timestamp_column", [](const RunConfig& c) { return std::string(c.timestamp_column ? "true" : "false"); },
         [](RunConfig& c, const std::string& v) { c.timestamp_column = parse_bool("timestamp_column", v); }},
        {"task", [](const RunConfig& c) { return task_name(c.task); },
         [](RunConfig& c, const std::string& v) {
             try {
                 c.task = parse_task(v);
             } catch (const std::invalid_argument& e) {
                 throw ConfigError(std::string("key 'task': ") + e.what());
             }
         }},
        {"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
         [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); }},
        size_key("lookback", &ModelConfig::lookback),
        size_key("horizon", &ModelConfig::horizon),
        size_key("d_model", &ModelConfig::d_model),
        size_key("kernel", &ModelConfig::kernel),
        size_key("trend_degree", &ModelConfig::trend_degree),
        size_key("top_k", &ModelConfig::top_k),
        size_key("patch_len", &ModelConfig::patch_len),
        size_key("stride", &ModelConfig::stride),
        double_key("lambda", &ModelConfig::lambda),
        double_key("learning_rate", &ModelConfig::learning_rate),
        size_key("batch_size", &ModelConfig::batch_size),
        size_key("epochs", &ModelConfig::epochs),
        size_key("patience", &ModelConfig::patience),
        {"max_steps", [](const RunConfig& c) { return std::to_string(c.max_steps); },
         [](RunConfig& c, const std::string& v) { c.max_steps = parse_number<std::size_t>("max_steps", v); }},
        string_key("out", &RunConfig::out),
        string_key("checkpoint", &RunConfig::checkpoint),
    };
    return keys;
}

inline const ConfigKey* find_key(const std::string& name) {
    for (const auto& k : config_keys())
        if (name == k.name) return &k;
    return nullptr;
}

}  // namespace detail

/// Ordered key/value pairs of a resolved config (also stored in checkpoints).
inline ConfigLines config_lines(const RunConfig& c) {
    ConfigLines out;
    for (const auto& k : detail::config_keys()) out.emplace_back(k.name, k.get(c));
    return out;
}

inline std::string serialize_config(const RunConfig& c) {
    std::string out;
    for (const auto& [k, v] : config_lines(c)) out += k + " = " + v + "\n";
    return out;
}

/// Applies pairs on top of defaults; a "preset" pair is applied first so
/// explicit keys override it. Does not validate.
inline RunConfig config_from_pairs(const ConfigLines& pairs, const std::string& origin = "config") {
    RunConfig c;
    std::vector<std::string> seen;
    for (const auto& [k, v] : pairs) {
        if (std::find(seen.begin(), seen.end(), k) != seen.end()) throw ConfigError(origin + ": key '" + k + "' given twice");
        seen.push_back(k);
        if (k == "preset") apply_preset(c, v);
    }
    for (const auto& [k, v] : pairs) {
        if (k == "preset") continue;
        const auto* key = detail::find_key(k);
        if (!key) throw ConfigError(origin + ": unknown key '" + k + "'");
        key->set(c, v);
    }
    return c;
}

inline RunConfig parse_config(const std::string& text, const std::string& origin = "config") {
    ConfigLines pairs;
    std::istringstream in(text);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(row) + ": expected 'key = value', got '" + line + "'");
        auto key = detail::trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(row) + ": empty key");
        pairs.emplace_back(std::move(key), detail::trim(line.substr(eq + 1)));
    }
    return config_from_pairs(pairs, origin);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return parse_config(s.str(), path);
}

}  // namespace itfkan
