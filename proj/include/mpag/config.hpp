#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mpag/errors.hpp"

namespace mpag {

/// Model and training hyperparameters. Defaults are the full-scale profile;
/// `desk_profile()` is the small configuration the test suites run on.
struct Config {
    std::size_t clusters = 3;        // K
    std::size_t cluster_size = 20;   // N reviews per cluster
    std::size_t hidden = 512;        // H
    std::size_t embedding = 256;     // E
    std::size_t slots = 8;           // S memory slots
    std::size_t read_heads = 4;      // T
    std::size_t max_q_len = 25;
    std::size_t max_a_len = 25;
    std::size_t max_r_len = 30;
    std::size_t beam = 4;
    double lr = 0.1;
    double adagrad_eps = 1e-8;
    std::size_t batch = 64;
    std::size_t epochs = 10;
    std::uint64_t seed = 1;
    std::size_t vocab_size = 30000;
    std::size_t kmeans_iters = 50;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
    std::vector<int> widths = {1, 2, 3, 4}; // CNN kernel widths
    bool invert_skeleton = false;           // experimental skeleton reweighting

    static Config desk_profile() {
        Config c;
        c.hidden = 32;
        c.embedding = 16;
        c.slots = 4;
        c.read_heads = 2;
        c.vocab_size = 500;
        c.widths = {1, 2};
        return c;
    }

    void validate() const {
        auto positive = [](std::size_t v, const char* name) {
            if (v == 0) throw ConfigError(std::string("config: ") + name + " must be positive");
        };
        positive(clusters, "clusters");
        positive(cluster_size, "cluster_size");
        positive(hidden, "hidden");
        positive(embedding, "embedding");
        positive(slots, "slots");
        positive(read_heads, "read_heads");
        positive(max_q_len, "max_q_len");
        positive(max_a_len, "max_a_len");
        positive(max_r_len, "max_r_len");
        positive(beam, "beam");
        positive(batch, "batch");
        positive(vocab_size, "vocab_size");
        positive(kmeans_iters, "kmeans_iters");
        if (lr <= 0.0) throw ConfigError("config: lr must be positive");
        if (adagrad_eps <= 0.0) throw ConfigError("config: adagrad_eps must be positive");
        if (bm25_k1 < 0.0) throw ConfigError("config: bm25_k1 must be non-negative");
        if (bm25_b < 0.0 || bm25_b > 1.0) throw ConfigError("config: bm25_b must lie in [0,1]");
        if (widths.empty()) throw ConfigError("config: widths must be non-empty");
        for (int w : widths)
            if (w < 1) throw ConfigError("config: kernel widths must be >= 1");
        if (hidden % 2 != 0) throw ConfigError("config: hidden must be even");
        if (hidden % widths.size() != 0)
            throw ConfigError("config: hidden (" + std::to_string(hidden) +
                              ") must be divisible by the number of kernel widths (" +
                              std::to_string(widths.size()) + ")");
        if (vocab_size <= 4) throw ConfigError("config: vocab_size must exceed the reserved ids");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream is(value);
    T v{};
    is >> v;
    if (is.fail() || !is.eof())
        throw ConfigError("config: bad value for " + key + ": \"" + value + "\"");
    return v;
}

} // namespace detail

/// Apply `key=value` lines onto a config. Unknown keys are an error;
/// '#'-prefixed lines and blank lines are ignored.
inline void apply_config_line(Config& c, const std::string& raw, const std::string& at) {
    std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#') return;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(at + ": expected key=value, got \"" + line + "\"");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));

    if (key == "clusters") c.clusters = detail::parse_number<std::size_t>(key, value);
    else if (key == "cluster_size") c.cluster_size = detail::parse_number<std::size_t>(key, value);
    else if (key == "hidden") c.hidden = detail::parse_number<std::size_t>(key, value);
    else if (key == "embedding") c.embedding = detail::parse_number<std::size_t>(key, value);
    else if (key == "slots") c.slots = detail::parse_number<std::size_t>(key, value);
    else if (key == "read_heads") c.read_heads = detail::parse_number<std::size_t>(key, value);
    else if (key == "max_q_len") c.max_q_len = detail::parse_number<std::size_t>(key, value);
    else if (key == "max_a_len") c.max_a_len = detail::parse_number<std::size_t>(key, value);
    else if (key == "max_r_len") c.max_r_len = detail::parse_number<std::size_t>(key, value);
    else if (key == "beam") c.beam = detail::parse_number<std::size_t>(key, value);
    else if (key == "lr") c.lr = detail::parse_number<double>(key, value);
    else if (key == "adagrad_eps") c.adagrad_eps = detail::parse_number<double>(key, value);
    else if (key == "batch") c.batch = detail::parse_number<std::size_t>(key, value);
    else if (key == "epochs") c.epochs = detail::parse_number<std::size_t>(key, value);
    else if (key == "seed") c.seed = detail::parse_number<std::uint64_t>(key, value);
    else if (key == "vocab_size") c.vocab_size = detail::parse_number<std::size_t>(key, value);
    else if (key == "kmeans_iters") c.kmeans_iters = detail::parse_number<std::size_t>(key, value);
    else if (key == "bm25_k1") c.bm25_k1 = detail::parse_number<double>(key, value);
    else if (key == "bm25_b") c.bm25_b = detail::parse_number<double>(key, value);
    else if (key == "invert_skeleton") {
        if (value == "true" || value == "1") c.invert_skeleton = true;
        else if (value == "false" || value == "0") c.invert_skeleton = false;
        else throw ConfigError(at + ": invert_skeleton must be true/false");
    } else if (key == "widths") {
        std::vector<int> widths;
        std::istringstream is(value);
        std::string piece;
        while (std::getline(is, piece, ',')) {
            piece = detail::trim(piece);
            if (!piece.empty()) widths.push_back(detail::parse_number<int>(key, piece));
        }
        if (widths.empty()) throw ConfigError(at + ": widths must list at least one kernel width");
        c.widths = std::move(widths);
    } else {
        throw ConfigError(at + ": unknown config key \"" + key + "\"");
    }
}

inline Config load_config(const std::string& path, Config base = Config{}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        apply_config_line(base, line, path + ":" + std::to_string(line_no));
    }
    base.validate();
    return base;
}

/// Canonical text form; the checkpoint embeds this for an exact round-trip.
inline std::string config_to_text(const Config& c) {
    std::ostringstream os;
    os << "clusters=" << c.clusters << "\n";
    os << "cluster_size=" << c.cluster_size << "\n";
    os << "hidden=" << c.hidden << "\n";
    os << "embedding=" << c.embedding << "\n";
    os << "slots=" << c.slots << "\n";
    os << "read_heads=" << c.read_heads << "\n";
    os << "max_q_len=" << c.max_q_len << "\n";
    os << "max_a_len=" << c.max_a_len << "\n";
    os << "max_r_len=" << c.max_r_len << "\n";
    os << "beam=" << c.beam << "\n";
    os.precision(17);
    os << "lr=" << c.lr << "\n";
    os << "adagrad_eps=" << c.adagrad_eps << "\n";
    os << "batch=" << c.batch << "\n";
    os << "epochs=" << c.epochs << "\n";
    os << "seed=" << c.seed << "\n";
    os << "vocab_size=" << c.vocab_size << "\n";
    os << "kmeans_iters=" << c.kmeans_iters << "\n";
    os << "bm25_k1=" << c.bm25_k1 << "\n";
    os << "bm25_b=" << c.bm25_b << "\n";
    os << "invert_skeleton=" << (c.invert_skeleton ? "true" : "false") << "\n";
    os << "widths=";
    for (std::size_t i = 0; i < c.widths.size(); ++i) os << (i ? "," : "") << c.widths[i];
    os << "\n";
    return os.str();
}

inline Config config_from_text(const std::string& text) {
    Config c;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        apply_config_line(c, line, "config:" + std::to_string(line_no));
    }
    c.validate();
    return c;
}

} // namespace mpag
