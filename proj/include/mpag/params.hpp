#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "mpag/errors.hpp"
#include "mpag/rng.hpp"
#include "mpag/tensor.hpp"

namespace mpag {

/// One named parameter tensor with its gradient slot and Adagrad accumulator.
struct Param {
    Tensor value;
    Tensor grad;
    Tensor acc;
};

/// Ordered collection of named parameters. Iteration order is the map order
/// (lexicographic by name), which keeps serialization and updates
/// deterministic.
class ParamStore {
  public:
    Param& add(const std::string& name, std::vector<std::size_t> shape) {
        if (entries_.count(name)) throw ConfigError("duplicate parameter name: " + name);
        Param p;
        p.value = Tensor::zeros(shape);
        p.grad = Tensor::zeros(shape);
        p.acc = Tensor::zeros(std::move(shape));
        auto [it, ok] = entries_.emplace(name, std::move(p));
        (void)ok;
        return it->second;
    }

    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    Param& at(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
        return it->second;
    }
    const Param& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
        return it->second;
    }

    std::map<std::string, Param>& entries() { return entries_; }
    const std::map<std::string, Param>& entries() const { return entries_; }

    std::size_t total_values() const {
        std::size_t n = 0;
        for (const auto& [name, p] : entries_) n += p.value.size();
        return n;
    }

    void zero_grads() {
        for (auto& [name, p] : entries_) p.grad.data.assign(p.grad.data.size(), 0.0);
    }

    /// Adagrad step: acc += g^2; value -= lr * g / (sqrt(acc) + eps).
    /// Gradients are reset to zero afterwards.
    void adagrad_update(double lr, double eps) {
        for (auto& [name, p] : entries_) {
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                double g = p.grad.data[i];
                p.acc.data[i] += g * g;
                p.value.data[i] -= lr * g / (std::sqrt(p.acc.data[i]) + eps);
                p.grad.data[i] = 0.0;
            }
        }
    }

  private:
    std::map<std::string, Param> entries_;
};

/// Uniform(-r, r) with r = sqrt(6 / (fan_in + fan_out)).
inline void init_uniform_fan(Param& p, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : p.value.data) v = rng.uniform(-r, r);
}

/// Weight matrices get fan-based uniform init, everything else stays zero.
inline void init_matrix(Param& p, Rng& rng) {
    init_uniform_fan(p, p.value.cols(), p.value.rows(), rng);
}

} // namespace mpag
