#pragma once

// Binary checkpoint:
//   "ITFK" | u32 version | u64 config bytes | config ("key=value\n" lines)
//   u64 tensor count | per tensor: u64 name bytes | name | u64 rank | u64 dims... | f64 values...
// All integers and floats are little-endian. Writes go to a temporary file
// that is renamed over the destination.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "itfkan/model.hpp"

namespace itfkan {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[4] = {'I', 'T', 'F', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

using ConfigLines = std::vector<std::pair<std::string, std::string>>;

struct Checkpoint {
    ConfigLines config;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return &t;
        return nullptr;
    }
    const std::string* setting(const std::string& key) const {
        for (const auto& [k, v] : config)
            if (k == key) return &v;
        return nullptr;
    }
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

class Reader {
public:
    explicit Reader(std::string data) : data_(std::move(data)) {}

    std::uint64_t u64() { return uint_n(8); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint_n(4)); }
    std::string bytes(std::uint64_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    std::uint64_t uint_n(int n) {
        need(static_cast<std::uint64_t>(n));
        std::uint64_t v = 0;
        for (int b = 0; b < n; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + b])) << (8 * b);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    void need(std::uint64_t n) const {
        if (n > data_.size() - pos_) throw CheckpointError("checkpoint truncated");
    }

    std::string data_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
    std::string out(kCheckpointMagic, 4);
    detail::put_u32(out, kCheckpointVersion);
    std::string cfg;
    for (const auto& [k, v] : ck.config) cfg += k + "=" + v + "\n";
    detail::put_u64(out, cfg.size());
    out += cfg;
    detail::put_u64(out, ck.tensors.size());
    for (const auto& [name, t] : ck.tensors) {
        detail::put_u64(out, name.size());
        out += name;
        detail::put_u64(out, t.rank());
        for (auto d : t.shape()) detail::put_u64(out, d);
        for (double v : t.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

inline Checkpoint decode_checkpoint(std::string bytes) {
    detail::Reader r(std::move(bytes));
    if (r.bytes(4) != std::string(kCheckpointMagic, 4)) throw CheckpointError("not a checkpoint (bad magic)");
    const auto version = r.u32();
    if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    std::istringstream cfg(r.bytes(r.u64()));
    std::string line;
    while (std::getline(cfg, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw CheckpointError("malformed config line '" + line + "'");
        ck.config.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    const auto count = r.u64();
    for (std::uint64_t k = 0; k < count; ++k) {
        std::string name = r.bytes(r.u64());
        const auto rank = r.u64();
        if (rank > 8) throw CheckpointError("tensor '" + name + "' has implausible rank");
        Shape shape;
        for (std::uint64_t d = 0; d < rank; ++d) shape.push_back(r.u64());
        std::vector<double> values(shape_numel(shape));
        for (auto& v : values) v = std::bit_cast<double>(r.u64());
        ck.tensors.emplace_back(std::move(name), Tensor(shape, std::move(values)));
    }
    if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload");
    return ck;
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
inline void write_file_atomic(const std::string& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write '" + tmp.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw CheckpointError("failed writing '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, target);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Parameters, edge masks and the frequency bins of a model.
inline Checkpoint make_checkpoint(const ForecastModel& model, ConfigLines config) {
    Checkpoint ck;
    ck.config = std::move(config);
    std::vector<double> bins(model.bins.begin(), model.bins.end());
    ck.tensors.emplace_back("freq.bins", Tensor({bins.size()}, bins));
    for (auto& [n, t] : model.named_parameters()) ck.tensors.emplace_back(n, t);
    for (auto& [n, t] : model.named_buffers()) ck.tensors.emplace_back(n, t);
    return ck;
}

inline void save_checkpoint(const std::string& path, const ForecastModel& model, ConfigLines config) {
    write_file_atomic(path, encode_checkpoint(make_checkpoint(model, std::move(config))));
}

inline Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

/// Rebuilds the model structure from `cfg` and the stored bins, then copies
/// every stored tensor into place. Missing, extra or mis-shaped tensors are errors.
inline ForecastModel restore_model(const Checkpoint& ck, const ModelConfig& cfg) {
    const Tensor* bins_t = ck.find("freq.bins");
    if (!bins_t) throw CheckpointError("checkpoint has no frequency bins");
    std::vector<std::size_t> bins;
    for (double b : bins_t->data()) bins.push_back(static_cast<std::size_t>(b));
    Rng rng(0);
    ForecastModel model = ForecastModel::build(cfg, bins, rng);
    std::size_t used = 1;
    model.rebind([&](const std::string& name, Tensor& slot) {
        const Tensor* src = ck.find(name);
        if (!src) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
        if (src->shape() != slot.shape())
            throw CheckpointError("tensor '" + name + "' has shape " + shape_str(src->shape()) + ", model expects " +
                                  shape_str(slot.shape()));
        std::copy(src->data().begin(), src->data().end(), slot.data().begin());
        ++used;
    });
    if (used != ck.tensors.size()) throw CheckpointError("checkpoint holds tensors the model does not use");
    return model;
}

}  // namespace itfkan
