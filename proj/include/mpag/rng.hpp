#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mpag/errors.hpp"

namespace mpag {

/// Deterministic random source. Draws are derived from the raw mt19937_64
/// stream with fixed arithmetic (no std distributions) so that sequences are
/// identical across standard libraries and can be checkpointed exactly.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 bits of randomness.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased index in [0, n) via rejection sampling.
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw GraphError("uniform_index: empty range");
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Textual engine state; portable per the standard's requirements on
    /// random engine stream operators.
    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
        if (is.fail()) throw IoError("rng state: malformed serialized engine state");
    }

  private:
    std::mt19937_64 engine_;
};

} // namespace mpag
