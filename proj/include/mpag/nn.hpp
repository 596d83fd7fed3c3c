#pragma once

#include <string>
#include <vector>

#include "mpag/graph.hpp"
#include "mpag/params.hpp"

namespace mpag {

// Parameter registration helpers. Registration order is fixed by the model
// assembly code, which makes seeded initialization reproducible.

/// Dense layer `name.W` (out x in, fan-uniform) and `name.b` (out, zero).
inline void register_dense(ParamStore& ps, const std::string& name, std::size_t out_dim,
                           std::size_t in_dim, Rng& rng) {
    init_matrix(ps.add(name + ".W", {out_dim, in_dim}), rng);
    ps.add(name + ".b", {out_dim});
}

/// Fused LSTM weights. Gate layout along the first axis is
/// [input; forget; candidate; output], each `hidden` rows.
inline void register_lstm(ParamStore& ps, const std::string& prefix, std::size_t in_dim,
                          std::size_t hidden, Rng& rng) {
    init_matrix(ps.add(prefix + ".W", {4 * hidden, in_dim}), rng);
    init_matrix(ps.add(prefix + ".U", {4 * hidden, hidden}), rng);
    ps.add(prefix + ".b", {4 * hidden});
}

/// Two direction-specific LSTMs of hidden size H/2 each.
inline void register_birnn(ParamStore& ps, const std::string& prefix, std::size_t in_dim,
                           std::size_t state_dim, Rng& rng) {
    if (state_dim % 2 != 0)
        throw ConfigError("bi-rnn state size must be even, got " + std::to_string(state_dim));
    register_lstm(ps, prefix + ".fwd", in_dim, state_dim / 2, rng);
    register_lstm(ps, prefix + ".bwd", in_dim, state_dim / 2, rng);
}

/// One kernel bank per width; channel counts sum to out_dim.
inline void register_conv(ParamStore& ps, const std::string& prefix, std::size_t emb_dim,
                          std::size_t out_dim, const std::vector<int>& widths, Rng& rng) {
    if (widths.empty() || out_dim % widths.size() != 0)
        throw ConfigError("conv output size " + std::to_string(out_dim) +
                          " not divisible by kernel width count " + std::to_string(widths.size()));
    std::size_t channels = out_dim / widths.size();
    for (int w : widths) {
        if (w < 1) throw ConfigError("conv kernel width must be positive");
        std::string name = prefix + ".w" + std::to_string(w);
        init_matrix(ps.add(name + ".K", {channels, static_cast<std::size_t>(w) * emb_dim}), rng);
        ps.add(name + ".b", {channels});
    }
}

/// Wx + b with parameters `name.W` / `name.b`.
inline Value dense(Graph& g, ParamStore& ps, const std::string& name, Value x) {
    return affine(g.param(ps, name + ".W"), x, g.param(ps, name + ".b"));
}

struct LstmState {
    Value h;
    Value c;
};

inline LstmState lstm_zero_state(Graph& g, std::size_t hidden) {
    Value z = g.constant(Tensor::zeros({hidden}));
    return {z, z};
}

/// One LSTM step with the standard gate equations.
inline LstmState lstm_step(Graph& g, ParamStore& ps, const std::string& prefix, LstmState s,
                           Value x) {
    Value w = g.param(ps, prefix + ".W");
    Value u = g.param(ps, prefix + ".U");
    Value b = g.param(ps, prefix + ".b");
    std::size_t hidden = w.val().rows() / 4;
    if (s.h.size() != hidden || s.c.size() != hidden)
        throw ShapeError("lstm_step: state size does not match parameters");
    Value gates = add(add(matvec(w, x), matvec(u, s.h)), b);
    Value i = sigmoid(slice(gates, 0, hidden));
    Value f = sigmoid(slice(gates, hidden, hidden));
    Value cand = tanh(slice(gates, 2 * hidden, hidden));
    Value o = sigmoid(slice(gates, 3 * hidden, hidden));
    Value c_new = add(mul(f, s.c), mul(i, cand));
    Value h_new = mul(o, tanh(c_new));
    return {h_new, c_new};
}

struct BiRnnOut {
    std::vector<Value> states; // per-step [forward_t ; backward_t], each state_dim
    Value final_state;         // [last forward ; last backward]
};

/// Forward chain over the sequence and backward chain over the reversed
/// sequence, H/2 units each; per-step states are position-aligned
/// concatenations.
inline BiRnnOut bi_rnn(Graph& g, ParamStore& ps, const std::string& prefix,
                       const std::vector<Value>& inputs) {
    if (inputs.empty()) throw ShapeError("bi_rnn: empty input sequence");
    std::size_t hidden = ps.at(prefix + ".fwd.W").value.rows() / 4;
    std::size_t t_len = inputs.size();

    std::vector<Value> fwd(t_len), bwd(t_len);
    LstmState s = lstm_zero_state(g, hidden);
    for (std::size_t t = 0; t < t_len; ++t) {
        s = lstm_step(g, ps, prefix + ".fwd", s, inputs[t]);
        fwd[t] = s.h;
    }
    Value fwd_last = s.h;

    s = lstm_zero_state(g, hidden);
    for (std::size_t t = t_len; t-- > 0;) {
        s = lstm_step(g, ps, prefix + ".bwd", s, inputs[t]);
        bwd[t] = s.h;
    }
    Value bwd_last = s.h; // state after consuming position 0

    BiRnnOut out;
    out.states.reserve(t_len);
    for (std::size_t t = 0; t < t_len; ++t) out.states.push_back(concat({fwd[t], bwd[t]}));
    out.final_state = concat({fwd_last, bwd_last});
    return out;
}

/// Multi-width 1-D convolution over an embedded sequence followed by a
/// per-channel max over positions. Symmetric zero padding keeps every width
/// at T output positions; width-w windows cover
/// [t - floor((w-1)/2), t + ceil((w-1)/2)].
inline Value conv_maxpool(Graph& g, ParamStore& ps, const std::string& prefix,
                          const std::vector<Value>& embeds, const std::vector<int>& widths) {
    if (embeds.empty()) throw ShapeError("conv_maxpool: empty sequence");
    std::size_t t_len = embeds.size();
    std::size_t emb_dim = embeds[0].size();
    Value zero_embed = g.constant(Tensor::zeros({emb_dim}));

    std::vector<Value> pooled;
    pooled.reserve(widths.size());
    for (int w : widths) {
        std::string name = prefix + ".w" + std::to_string(w);
        Value k = g.param(ps, name + ".K");
        Value b = g.param(ps, name + ".b");
        int left = (w - 1) / 2;
        std::vector<Value> positions;
        positions.reserve(t_len);
        for (std::size_t t = 0; t < t_len; ++t) {
            std::vector<Value> window;
            window.reserve(static_cast<std::size_t>(w));
            for (int off = 0; off < w; ++off) {
                long idx = static_cast<long>(t) - left + off;
                window.push_back(idx >= 0 && idx < static_cast<long>(t_len)
                                     ? embeds[static_cast<std::size_t>(idx)]
                                     : zero_embed);
            }
            Value win = w == 1 ? window[0] : concat(std::span<const Value>(window));
            positions.push_back(affine(k, win, b));
        }
        pooled.push_back(max_reduce(positions));
    }
    return pooled.size() == 1 ? pooled[0] : concat(std::span<const Value>(pooled));
}

} // namespace mpag
