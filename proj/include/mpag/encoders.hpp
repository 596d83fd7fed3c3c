#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpag/config.hpp"
#include "mpag/graph.hpp"
#include "mpag/nn.hpp"
#include "mpag/text.hpp"

namespace mpag {

/// Shared word embedding table; questions, reviews, attributes and prototypes
/// all index the same matrix.
inline Value embed(Graph& g, ParamStore& ps, TokenId id) {
    return row(g.param(ps, "embed"), id);
}

inline std::vector<Value> embed_sequence(Graph& g, ParamStore& ps,
                                         const std::vector<TokenId>& ids) {
    std::vector<Value> out;
    out.reserve(ids.size());
    for (TokenId id : ids) out.push_back(embed(g, ps, id));
    return out;
}

struct QuestionEncoding {
    std::vector<Value> states; // h^q_1..T, each H
    Value final_state;         // h^q_T
};

inline QuestionEncoding encode_question(Graph& g, ParamStore& ps,
                                        const std::vector<TokenId>& question) {
    if (question.empty()) throw DataError("encode_question: empty question");
    auto rnn = bi_rnn(g, ps, "q_rnn", embed_sequence(g, ps, question));
    return {std::move(rnn.states), rnn.final_state};
}

/// CNN + max-pool review vector. Padded reviews still produce a vector; the
/// chain below masks them out.
inline Value encode_review(Graph& g, ParamStore& ps, const std::vector<TokenId>& review,
                           const std::vector<int>& widths) {
    std::vector<TokenId> ids = review;
    if (ids.empty()) ids.push_back(kPadId);
    return conv_maxpool(g, ps, "cnn", embed_sequence(g, ps, ids), widths);
}

struct ClusterEncoding {
    std::vector<Value> states;        // s^r_1..N; padded positions repeat the previous state
    Value salience;                   // g_1..N with zeros on padded entries
    Value last_state;                 // s^r_N
    std::vector<std::uint8_t> valid;
};

/// Selective-reading chain over one cluster. The update gate is normalized
/// across the cluster's valid reviews and doubles as the per-review salience
/// weight; padded positions carry the previous state forward.
inline ClusterEncoding sru_chain(Graph& g, ParamStore& ps, const std::vector<Value>& review_vecs,
                                 const std::vector<std::uint8_t>& valid, Value question_final) {
    std::size_t n = valid.size();
    if (review_vecs.size() != n) throw ShapeError("sru_chain: review count does not match mask");
    bool any_valid = false;
    for (auto v : valid) any_valid = any_valid || v;
    if (!any_valid) throw DataError("sru_chain: all reviews in the cluster are masked");

    std::size_t h_dim = question_final.size();

    // Salience logits: z_i = W2 tanh(W1 [h^r x h^q ; h^r ; h^q] + b1) + b2.
    Value zero_logit = g.constant_scalar(0.0);
    std::vector<Value> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!valid[i]) {
            logits[i] = zero_logit; // masked; value irrelevant
            continue;
        }
        Value fused = concat({mul(review_vecs[i], question_final), review_vecs[i], question_final});
        logits[i] = dense(g, ps, "sru.z2", mpag::tanh(dense(g, ps, "sru.z1", fused)));
    }
    Value salience = softmax_masked(concat(std::span<const Value>(logits)), valid);

    ClusterEncoding out;
    out.valid = valid;
    out.salience = salience;
    out.states.reserve(n);
    Value state = g.constant(Tensor::zeros({h_dim}));
    Value one = g.constant_scalar(1.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (valid[i]) {
            Value gate = pick(salience, i);
            Value q_i = sigmoid(add(add(matvec(g.param(ps, "sru.q.W"), review_vecs[i]),
                                        matvec(g.param(ps, "sru.q.U"), state)),
                                    g.param(ps, "sru.q.b")));
            Value cand = mpag::tanh(add(add(matvec(g.param(ps, "sru.s.W"), review_vecs[i]),
                                            mul(q_i, matvec(g.param(ps, "sru.s.U"), state))),
                                        g.param(ps, "sru.s.b")));
            state = add(scale_by(cand, gate), scale_by(state, sub(one, gate)));
        }
        out.states.push_back(state);
    }
    out.last_state = state;
    return out;
}

struct AttributeEncoding {
    Value weights; // lambda over attributes; invalid handle when none exist
    Value summary; // o^a, embedding-dim
};

/// Key-value attribute memory: question-key matching weights and the
/// weighted value-embedding sum.
inline AttributeEncoding kvmn_attributes(Graph& g, ParamStore& ps,
                                         const std::vector<std::pair<TokenId, TokenId>>& attributes,
                                         Value question_final) {
    AttributeEncoding out;
    std::size_t e_dim = ps.at("embed").value.cols();
    if (attributes.empty()) {
        out.summary = g.constant(Tensor::zeros({e_dim}));
        return out;
    }
    std::vector<Value> logits;
    logits.reserve(attributes.size());
    Value wa = g.param(ps, "kvmn.Wa");
    for (const auto& [key_id, value_id] : attributes)
        logits.push_back(dot(question_final, matvec(wa, embed(g, ps, key_id))));
    out.weights = softmax(concat(std::span<const Value>(logits)));

    std::vector<Value> weighted;
    weighted.reserve(attributes.size());
    for (std::size_t i = 0; i < attributes.size(); ++i)
        weighted.push_back(scale_by(embed(g, ps, attributes[i].second), pick(out.weights, i)));
    out.summary = add_n(weighted);
    return out;
}

/// Parameter registration for the encoder stack.
inline void register_encoder_params(ParamStore& ps, const Config& cfg, std::size_t vocab_size,
                                    Rng& rng) {
    std::size_t h = cfg.hidden, e = cfg.embedding;
    init_matrix(ps.add("embed", {vocab_size, e}), rng);
    register_birnn(ps, "q_rnn", e, h, rng);
    register_conv(ps, "cnn", e, h, cfg.widths, rng);
    register_dense(ps, "sru.z1", h, 3 * h, rng);
    register_dense(ps, "sru.z2", 1, h, rng);
    init_matrix(ps.add("sru.q.W", {h, h}), rng);
    init_matrix(ps.add("sru.q.U", {h, h}), rng);
    ps.add("sru.q.b", {h});
    init_matrix(ps.add("sru.s.W", {h, h}), rng);
    init_matrix(ps.add("sru.s.U", {h, h}), rng);
    ps.add("sru.s.b", {h});
    init_matrix(ps.add("kvmn.Wa", {h, e}), rng);
}

} // namespace mpag
