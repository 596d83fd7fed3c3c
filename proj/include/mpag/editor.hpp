#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mpag/config.hpp"
#include "mpag/encoders.hpp"
#include "mpag/graph.hpp"
#include "mpag/nn.hpp"
#include "mpag/prototype.hpp"

namespace mpag {

struct Attention {
    Value weights;
    Value context;
};

/// score_i = v . tanh(W1 q + W2 s_i); weights softmax over states.
inline Attention additive_attention(Graph& g, ParamStore& ps, const std::string& prefix,
                                    Value query, const std::vector<Value>& states) {
    if (states.empty()) throw ShapeError("additive_attention: no states to attend over");
    Value w1q = matvec(g.param(ps, prefix + ".W1"), query);
    Value v = g.param(ps, prefix + ".v");
    std::vector<Value> scores;
    scores.reserve(states.size());
    for (const Value& s : states)
        scores.push_back(dot(v, mpag::tanh(add(w1q, matvec(g.param(ps, prefix + ".W2"), s)))));
    Attention out;
    out.weights = softmax(concat(std::span<const Value>(scores)));
    std::vector<Value> weighted;
    weighted.reserve(states.size());
    for (std::size_t i = 0; i < states.size(); ++i)
        weighted.push_back(scale_by(states[i], pick(out.weights, i)));
    out.context = add_n(weighted);
    return out;
}

/// score_i = q^T W_f s_i. An optional mask zeroes out invalid states; when
/// every state is masked (or none exist) the context is a zero vector and the
/// weights handle stays invalid.
inline Attention bilinear_attention(Graph& g, ParamStore& ps, const std::string& w_name,
                                    Value query, const std::vector<Value>& states,
                                    const std::vector<std::uint8_t>* mask = nullptr) {
    Attention out;
    bool any = false;
    if (mask) {
        for (auto v : *mask) any = any || v;
    } else {
        any = !states.empty();
    }
    if (!any) {
        out.context = g.constant(Tensor::zeros({query.size()}));
        return out;
    }
    Value wf = g.param(ps, w_name);
    Value zero = g.constant_scalar(0.0);
    std::vector<Value> scores;
    scores.reserve(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        bool keep = !mask || (*mask)[i];
        scores.push_back(keep ? dot(query, matvec(wf, states[i])) : zero);
    }
    Value logits = concat(std::span<const Value>(scores));
    out.weights = mask ? softmax_masked(logits, *mask) : softmax(logits);
    std::vector<Value> weighted;
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (mask && !(*mask)[i]) continue;
        weighted.push_back(scale_by(states[i], pick(out.weights, i)));
    }
    out.context = add_n(weighted);
    return out;
}

/// Everything the decoder attends over; built once per example.
struct DecodeContext {
    std::vector<Value> question_states;
    Value question_final;
    Value attr_summary;                  // o^a
    Skeleton skeleton;                   // editable prototype states
    std::vector<Value> cluster_results;  // o^r_1..K (zero vectors for empty clusters)
    std::vector<std::uint8_t> cluster_valid;
};

struct DecoderState {
    LstmState lstm;
    Value question_context; // c^q from the previous step; zero at t=0
};

/// h'_0 = W_e [h^q ; o^a] + b_e with a zero cell and zero question context.
inline DecoderState init_state(Graph& g, ParamStore& ps, Value question_final,
                               Value attr_summary) {
    DecoderState s;
    s.lstm.h = dense(g, ps, "dec.init", concat({question_final, attr_summary}));
    s.lstm.c = g.constant(Tensor::zeros({s.lstm.h.size()}));
    s.question_context = g.constant(Tensor::zeros({s.lstm.h.size()}));
    return s;
}

struct StepOutput {
    Value dist;        // P_v over the vocabulary
    Value gate;        // editing gate, scalar in (0,1)
    Attention q_attn;  // over question states
    Attention e_attn;  // delta over the skeleton
    Attention m_attn;  // epsilon over cluster results
};

/// One decode step: LSTM on [c^q_{t-1} ; e(y_{t-1})], three context
/// attentions, the editing gate blend and the output projection.
inline StepOutput decode_step(Graph& g, ParamStore& ps, DecoderState& state, TokenId prev_token,
                              const DecodeContext& ctx) {
    Value input = concat({state.question_context, embed(g, ps, prev_token)});
    state.lstm = lstm_step(g, ps, "dec.lstm", state.lstm, input);
    Value h = state.lstm.h;

    StepOutput out;
    out.q_attn = additive_attention(g, ps, "dec.qattn", h, ctx.question_states);
    state.question_context = out.q_attn.context;

    out.e_attn = bilinear_attention(g, ps, "dec.edit.Wf", h, ctx.skeleton.vectors);
    out.m_attn = bilinear_attention(g, ps, "dec.mem.Wf", h, ctx.cluster_results,
                                    &ctx.cluster_valid);

    out.gate = sigmoid(dense(g, ps, "dec.gate", h));
    Value one = g.constant_scalar(1.0);
    Value fused = concat({scale_by(out.m_attn.context, out.gate),
                          scale_by(out.e_attn.context, sub(one, out.gate))});
    Value proj = dense(g, ps, "dec.out", concat({h, fused, out.q_attn.context}));
    out.dist = softmax(dense(g, ps, "dec.vocab", proj));
    return out;
}

/// Negative log likelihood of the target ids under the per-step
/// distributions. PAD targets are excluded; log probabilities are floored at
/// 1e-12.
inline Value nll_loss(Graph& g, const std::vector<Value>& step_dists,
                      const std::vector<TokenId>& targets) {
    if (step_dists.size() != targets.size())
        throw ShapeError("nll_loss: distribution and target counts differ");
    std::vector<Value> terms;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        if (targets[t] == kPadId) continue;
        terms.push_back(log_floor(pick(step_dists[t], targets[t])));
    }
    if (terms.empty()) return g.constant_scalar(0.0);
    return scale(add_n(terms), -1.0);
}

inline void register_editor_params(ParamStore& ps, const Config& cfg, std::size_t vocab_size,
                                   Rng& rng) {
    std::size_t h = cfg.hidden, e = cfg.embedding;
    register_dense(ps, "dec.init", h, h + e, rng);
    register_lstm(ps, "dec.lstm", h + e, h, rng);
    init_matrix(ps.add("dec.qattn.W1", {h, h}), rng);
    init_matrix(ps.add("dec.qattn.W2", {h, h}), rng);
    init_uniform_fan(ps.add("dec.qattn.v", {h}), h, 1, rng);
    init_matrix(ps.add("dec.edit.Wf", {h, h}), rng);
    init_matrix(ps.add("dec.mem.Wf", {h, h}), rng);
    register_dense(ps, "dec.gate", 1, h, rng);
    register_dense(ps, "dec.out", h, 4 * h, rng);
    register_dense(ps, "dec.vocab", vocab_size, h, rng);
}

// ---------------------------------------------------------------------------
// Beam search, decoupled from the model through a stepper callable:
//   step(state, prev_token) -> (next_state, log-probs over the vocabulary).
// ---------------------------------------------------------------------------

struct BeamResult {
    std::vector<TokenId> tokens; // BOS/EOS stripped
    double log_prob = 0.0;       // cumulative, EOS step included
    double score = 0.0;          // log_prob / steps (length normalization)
    std::size_t steps = 0;
};

/// Standard beam search. Hypotheses emitting EOS are frozen into a finished
/// pool; live pruning ranks by cumulative log-probability and the final
/// answer maximizes the length-normalized score. A hypothesis's length is the
/// number of decode steps it took (the EOS step counts).
template <typename State, typename StepFn>
BeamResult beam_search(State init_state, StepFn&& step, std::size_t width, std::size_t max_len,
                       TokenId bos = kBosId, TokenId eos = kEosId) {
    if (width < 1) throw ConfigError("beam_search: width must be >= 1");
    if (max_len < 1) throw ConfigError("beam_search: max_len must be >= 1");

    struct Hyp {
        std::vector<TokenId> tokens;
        double log_prob = 0.0;
        State state;
    };
    std::vector<Hyp> live;
    live.push_back(Hyp{{}, 0.0, std::move(init_state)});
    std::vector<BeamResult> finished;

    for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
        std::vector<Hyp> expansions;
        for (Hyp& hyp : live) {
            TokenId prev = hyp.tokens.empty() ? bos : hyp.tokens.back();
            auto [next_state, logp] = step(hyp.state, prev);
            // top-`width` tokens of this hypothesis; ties keep lower ids
            std::vector<std::size_t> order(logp.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::size_t take = std::min(width, order.size());
            std::partial_sort(order.begin(), order.begin() + static_cast<long>(take), order.end(),
                              [&](std::size_t a, std::size_t b) {
                                  if (logp[a] != logp[b]) return logp[a] > logp[b];
                                  return a < b;
                              });
            for (std::size_t k = 0; k < take; ++k) {
                Hyp ext;
                ext.tokens = hyp.tokens;
                ext.tokens.push_back(static_cast<TokenId>(order[k]));
                ext.log_prob = hyp.log_prob + logp[order[k]];
                ext.state = next_state;
                expansions.push_back(std::move(ext));
            }
        }
        std::stable_sort(expansions.begin(), expansions.end(),
                         [](const Hyp& a, const Hyp& b) { return a.log_prob > b.log_prob; });

        live.clear();
        for (Hyp& hyp : expansions) {
            if (hyp.tokens.back() == eos) {
                BeamResult r;
                r.steps = hyp.tokens.size();
                r.tokens.assign(hyp.tokens.begin(), hyp.tokens.end() - 1);
                r.log_prob = hyp.log_prob;
                r.score = hyp.log_prob / static_cast<double>(r.steps);
                finished.push_back(std::move(r));
            } else if (live.size() < width) {
                live.push_back(std::move(hyp));
            }
        }
    }
    for (Hyp& hyp : live) {
        BeamResult r;
        r.steps = hyp.tokens.size();
        r.tokens = std::move(hyp.tokens);
        r.log_prob = hyp.log_prob;
        r.score = hyp.log_prob / static_cast<double>(r.steps);
        finished.push_back(std::move(r));
    }

    BeamResult best;
    bool first = true;
    for (BeamResult& r : finished) {
        if (first || r.score > best.score) {
            best = r;
            first = false;
        }
    }
    if (first) throw GraphError("beam_search: no hypothesis produced");
    return best;
}

} // namespace mpag
