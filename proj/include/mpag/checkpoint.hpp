#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mpag/config.hpp"
#include "mpag/errors.hpp"
#include "mpag/model.hpp"
#include "mpag/rng.hpp"
#include "mpag/serialize.hpp"

namespace mpag {

constexpr const char* kCheckpointMagic = "MPAGCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to resume training exactly: model, optimizer
/// accumulators, RNG stream and progress counters.
struct TrainingState {
    Model model;
    Rng rng{0};
    std::uint64_t epoch = 0;
    std::uint64_t step = 0;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t vocab_hash(const Vocabulary& v) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& t : v.tokens()) {
        h = fnv1a(t, h);
        h = fnv1a("\x1f", h);
    }
    return h;
}

inline void write_section(std::ostream& os, const std::string& payload) {
    write_str(os, payload);
}

inline std::string read_section(std::istream& is) { return read_str(is); }

inline void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
    write_str(os, name);
    write_u64(os, t.shape.size());
    for (std::size_t d : t.shape) write_u64(os, d);
    for (double v : t.data) write_f64(os, v);
}

inline std::pair<std::string, Tensor> read_tensor(std::istream& is) {
    std::string name = read_str(is);
    std::uint64_t rank = read_u64(is);
    if (rank > 4) throw IoError("corrupt checkpoint: tensor rank " + std::to_string(rank));
    std::vector<std::size_t> shape;
    for (std::uint64_t i = 0; i < rank; ++i) shape.push_back(read_u64(is));
    Tensor t(shape);
    for (double& v : t.data) v = read_f64(is);
    return {std::move(name), std::move(t)};
}

} // namespace detail

/// Layout: magic, version, then length-prefixed sections
/// (config text, vocabulary, parameter tensors, Adagrad accumulators,
/// RNG state + counters). Writing is canonical, so identical states produce
/// byte-identical files.
inline void save_checkpoint(const TrainingState& st, const std::string& path) {
    std::ostringstream config_sec;
    config_sec << config_to_text(st.model.cfg);

    std::ostringstream vocab_sec;
    write_u64(vocab_sec, st.model.vocab.size());
    for (const auto& t : st.model.vocab.tokens()) write_str(vocab_sec, t);
    write_u64(vocab_sec, detail::vocab_hash(st.model.vocab));

    std::ostringstream tensor_sec, acc_sec;
    write_u64(tensor_sec, st.model.params.entries().size());
    write_u64(acc_sec, st.model.params.entries().size());
    for (const auto& [name, p] : st.model.params.entries()) {
        detail::write_tensor(tensor_sec, name, p.value);
        detail::write_tensor(acc_sec, name, p.acc);
    }

    std::ostringstream run_sec;
    write_str(run_sec, st.rng.serialize());
    write_u64(run_sec, st.epoch);
    write_u64(run_sec, st.step);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, 8);
    write_u32(out, kCheckpointVersion);
    detail::write_section(out, config_sec.str());
    detail::write_section(out, vocab_sec.str());
    detail::write_section(out, tensor_sec.str());
    detail::write_section(out, acc_sec.str());
    detail::write_section(out, run_sec.str());
    if (!out) throw IoError("checkpoint write failed: " + path);
}

inline TrainingState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::string(magic, 8) != kCheckpointMagic)
        throw IoError("not a checkpoint file (bad magic): " + path);
    std::uint32_t version = read_u32(in);
    if (version != kCheckpointVersion)
        throw IoError("checkpoint version mismatch: file has v" + std::to_string(version) +
                      ", this build reads v" + std::to_string(kCheckpointVersion));

    std::istringstream config_sec(detail::read_section(in));
    std::istringstream vocab_sec(detail::read_section(in));
    std::istringstream tensor_sec(detail::read_section(in));
    std::istringstream acc_sec(detail::read_section(in));
    std::istringstream run_sec(detail::read_section(in));

    std::string config_text((std::istreambuf_iterator<char>(config_sec)),
                            std::istreambuf_iterator<char>());
    Config cfg = config_from_text(config_text);

    std::uint64_t vocab_count = read_u64(vocab_sec);
    Vocabulary loaded;
    for (std::uint64_t i = 0; i < vocab_count; ++i) {
        std::string tok = read_str(vocab_sec);
        if (i >= kNumReserved) loaded.push(tok);
        else if (tok != loaded.token(static_cast<TokenId>(i)))
            throw IoError("corrupt checkpoint: reserved vocabulary entry mismatch");
    }
    std::uint64_t stored_hash = read_u64(vocab_sec);
    if (stored_hash != detail::vocab_hash(loaded))
        throw IoError("checkpoint vocabulary hash mismatch (corrupt or edited file)");

    TrainingState st;
    st.model = Model::create(cfg, std::move(loaded));

    auto load_into = [&](std::istringstream& sec, bool into_acc) {
        std::uint64_t count = read_u64(sec);
        if (count != st.model.params.entries().size())
            throw IoError("checkpoint parameter count mismatch: file has " +
                          std::to_string(count) + ", model defines " +
                          std::to_string(st.model.params.entries().size()));
        for (std::uint64_t i = 0; i < count; ++i) {
            auto [name, t] = detail::read_tensor(sec);
            Param& p = st.model.params.at(name);
            if (t.shape != p.value.shape)
                throw IoError("checkpoint tensor shape mismatch for " + name);
            (into_acc ? p.acc : p.value) = std::move(t);
        }
    };
    load_into(tensor_sec, false);
    load_into(acc_sec, true);

    st.rng.deserialize(read_str(run_sec));
    st.epoch = read_u64(run_sec);
    st.step = read_u64(run_sec);
    return st;
}

} // namespace mpag
