#pragma once

#include <string>
#include <vector>

#include "mpag/config.hpp"
#include "mpag/encoders.hpp"
#include "mpag/graph.hpp"
#include "mpag/nn.hpp"

namespace mpag {

/// Prototype question/answer hidden states. The prototype question runs
/// through the same Bi-RNN as the live question; the prototype answer has its
/// own Bi-RNN.
struct PrototypeEncoding {
    std::vector<Value> question_states;
    std::vector<Value> answer_states;
};

inline PrototypeEncoding encode_prototype(Graph& g, ParamStore& ps,
                                          const std::vector<TokenId>& proto_question,
                                          const std::vector<TokenId>& proto_answer) {
    PrototypeEncoding out;
    if (!proto_question.empty())
        out.question_states = bi_rnn(g, ps, "q_rnn", embed_sequence(g, ps, proto_question)).states;
    if (!proto_answer.empty())
        out.answer_states =
            bi_rnn(g, ps, "proto_a_rnn", embed_sequence(g, ps, proto_answer)).states;
    return out;
}

/// D[i][j] = w . [hq_i ; ha_j ; hq_i * ha_j], a trainable scalar similarity.
inline std::vector<std::vector<Value>> similarity_matrix(Graph& g, ParamStore& ps,
                                                         const std::vector<Value>& question_states,
                                                         const std::vector<Value>& answer_states) {
    std::vector<std::vector<Value>> d;
    if (question_states.empty() || answer_states.empty()) return d;
    Value w = g.param(ps, "proto.alpha.w");
    d.resize(question_states.size());
    for (std::size_t i = 0; i < question_states.size(); ++i) {
        d[i].reserve(answer_states.size());
        for (std::size_t j = 0; j < answer_states.size(); ++j) {
            Value feats = concat({question_states[i], answer_states[j],
                                  mul(question_states[i], answer_states[j])});
            d[i].push_back(dot(w, feats));
        }
    }
    return d;
}

struct Skeleton {
    std::vector<Value> vectors;   // skeleton states, one per prototype answer word
    std::vector<Value> col_means; // d_t
    bool present = false;         // false when no prototype exists
};

/// Column means of D scale the prototype answer states into the editable
/// skeleton. d_t is used raw; the optional inverted variant replaces it with
/// 1 - sigmoid(d_t).
inline Skeleton extract_skeleton(Graph& g, const std::vector<std::vector<Value>>& d,
                                 const std::vector<Value>& answer_states,
                                 bool invert = false) {
    Skeleton out;
    if (answer_states.empty()) return out;
    if (!d.empty() && d[0].size() != answer_states.size())
        throw ShapeError("extract_skeleton: similarity columns do not match answer states");
    out.present = true;
    std::size_t rows = d.size();
    for (std::size_t t = 0; t < answer_states.size(); ++t) {
        Value mean;
        if (rows == 0) {
            mean = g.constant_scalar(0.0);
        } else {
            std::vector<Value> col;
            col.reserve(rows);
            for (std::size_t i = 0; i < rows; ++i) col.push_back(d[i][t]);
            mean = scale(add_n(col), 1.0 / static_cast<double>(rows));
        }
        if (invert) mean = sub(g.constant_scalar(1.0), sigmoid(mean));
        out.col_means.push_back(mean);
        out.vectors.push_back(scale_by(answer_states[t], mean));
    }
    return out;
}

/// Missing prototype: a single zero vector keeps the editing attention well
/// defined downstream.
inline Skeleton empty_skeleton(Graph& g, std::size_t h_dim) {
    Skeleton out;
    out.present = false;
    out.vectors.push_back(g.constant(Tensor::zeros({h_dim})));
    return out;
}

/// Full prototype path: encode, match, extract. Falls back to the empty
/// skeleton when either side of the prototype pair is missing.
inline Skeleton read_prototype(Graph& g, ParamStore& ps, const Config& cfg,
                               const std::vector<TokenId>& proto_question,
                               const std::vector<TokenId>& proto_answer) {
    if (proto_answer.empty()) return empty_skeleton(g, cfg.hidden);
    PrototypeEncoding enc = encode_prototype(g, ps, proto_question, proto_answer);
    auto d = similarity_matrix(g, ps, enc.question_states, enc.answer_states);
    Skeleton sk = extract_skeleton(g, d, enc.answer_states, cfg.invert_skeleton);
    if (!sk.present) return empty_skeleton(g, cfg.hidden);
    return sk;
}

inline void register_prototype_params(ParamStore& ps, const Config& cfg, Rng& rng) {
    register_birnn(ps, "proto_a_rnn", cfg.embedding, cfg.hidden, rng);
    init_uniform_fan(ps.add("proto.alpha.w", {3 * cfg.hidden}), 3 * cfg.hidden, 1, rng);
}

} // namespace mpag
