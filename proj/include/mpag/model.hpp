#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mpag/cluster.hpp"
#include "mpag/config.hpp"
#include "mpag/dataset.hpp"
#include "mpag/editor.hpp"
#include "mpag/encoders.hpp"
#include "mpag/memory.hpp"
#include "mpag/prototype.hpp"

namespace mpag {

/// The assembled generator: configuration, vocabulary and every parameter
/// tensor. Parameter registration order is fixed, so a seed fully determines
/// the initialization.
struct Model {
    Config cfg;
    Vocabulary vocab;
    ParamStore params;

    static Model create(Config cfg, Vocabulary vocab) {
        cfg.validate();
        Model m;
        m.cfg = std::move(cfg);
        m.vocab = std::move(vocab);
        Rng rng(m.cfg.seed);
        register_encoder_params(m.params, m.cfg, m.vocab.size(), rng);
        register_memory_params(m.params, m.cfg, rng);
        register_prototype_params(m.params, m.cfg, rng);
        register_editor_params(m.params, m.cfg, m.vocab.size(), rng);
        return m;
    }
};

struct PreparedExample {
    Example ex;
    ReviewClusters clusters;
};

/// Cluster the record's reviews, preferring the cached assignment when it
/// matches the configured K and N.
inline ReviewClusters cluster_reviews(const RawRecord& rec, const Vocabulary& vocab,
                                      const Config& cfg) {
    std::size_t n_reviews = rec.reviews.size();
    if (rec.clusters && rec.clusters->size() == cfg.clusters) {
        bool fits = true;
        for (const auto& members : *rec.clusters)
            fits = fits && members.size() <= cfg.cluster_size;
        if (fits) {
            ReviewClusters rc;
            rc.k = cfg.clusters;
            rc.n = cfg.cluster_size;
            rc.member_index.assign(rc.k, std::vector<long>(rc.n, -1));
            rc.valid.assign(rc.k, std::vector<std::uint8_t>(rc.n, 0));
            for (std::size_t c = 0; c < rc.k; ++c) {
                const auto& members = (*rec.clusters)[c];
                for (std::size_t j = 0; j < members.size(); ++j) {
                    rc.member_index[c][j] = members[j];
                    rc.valid[c][j] = 1;
                }
            }
            return rc;
        }
    }
    std::vector<SparsePoint> points;
    points.reserve(n_reviews);
    for (const auto& r : rec.reviews)
        points.push_back(SparsePoint::from_counts(bow_vector(tokenize(r), vocab)));
    auto km = kmeans(points, cfg.clusters, cfg.kmeans_iters, cfg.seed);
    // K >= n leaves assignments beyond K-1 impossible, but clamp defensively.
    std::vector<std::size_t> assignment = km.assignment;
    for (auto& a : assignment) a = std::min(a, cfg.clusters - 1);
    return form_clusters(assignment, n_reviews, cfg.clusters, cfg.cluster_size, rec.review_scores);
}

inline PreparedExample prepare_example(const RawRecord& rec, const Vocabulary& vocab,
                                       const Config& cfg) {
    PreparedExample pe;
    pe.ex = encode_example(rec, vocab, cfg.max_q_len, cfg.max_a_len, cfg.max_r_len);
    pe.clusters = cluster_reviews(rec, vocab, cfg);
    return pe;
}

inline std::vector<PreparedExample> prepare_examples(const std::vector<RawRecord>& records,
                                                     const Vocabulary& vocab, const Config& cfg) {
    std::vector<PreparedExample> out;
    out.reserve(records.size());
    for (const auto& rec : records) out.push_back(prepare_example(rec, vocab, cfg));
    return out;
}

/// Per-example encoder outputs plus the attention context handed to the
/// decoder.
struct EncodedExample {
    QuestionEncoding question;
    AttributeEncoding attrs;
    std::vector<ReasoningResult> cluster_reasoning; // entry per cluster; empty ones flagged
    DecodeContext ctx;
};

inline EncodedExample encode_context(Graph& g, Model& m, const PreparedExample& pe) {
    EncodedExample enc;
    enc.question = encode_question(g, m.params, pe.ex.question);

    enc.attrs = kvmn_attributes(g, m.params, pe.ex.attributes, enc.question.final_state);

    Value zero_result = g.constant(Tensor::zeros({m.cfg.hidden}));
    enc.ctx.cluster_valid.assign(pe.clusters.k, 0);
    for (std::size_t c = 0; c < pe.clusters.k; ++c) {
        std::vector<const std::vector<TokenId>*> reviews(pe.clusters.n, nullptr);
        std::vector<std::uint8_t> valid(pe.clusters.n, 0);
        for (std::size_t j = 0; j < pe.clusters.n; ++j) {
            long idx = pe.clusters.member_index[c][j];
            if (pe.clusters.valid[c][j] && idx >= 0) {
                reviews[j] = &pe.ex.reviews[static_cast<std::size_t>(idx)];
                valid[j] = 1;
            }
        }
        try {
            enc.cluster_reasoning.push_back(
                reason_cluster(g, m.params, m.cfg, reviews, valid, enc.question.final_state));
            enc.ctx.cluster_results.push_back(enc.cluster_reasoning.back().output);
            enc.ctx.cluster_valid[c] = 1;
        } catch (const EmptyClusterSignal&) {
            ReasoningResult empty;
            empty.empty = true;
            empty.valid = valid;
            enc.cluster_reasoning.push_back(std::move(empty));
            enc.ctx.cluster_results.push_back(zero_result);
        }
    }

    enc.ctx.skeleton =
        read_prototype(g, m.params, m.cfg, pe.ex.prototype_question, pe.ex.prototype_answer);
    enc.ctx.question_states = enc.question.states;
    enc.ctx.question_final = enc.question.final_state;
    enc.ctx.attr_summary = enc.attrs.summary;
    return enc;
}

struct TrainForward {
    Value loss;                    // summed NLL over non-pad targets
    std::size_t target_tokens = 0; // non-pad targets contributing to the loss
    std::vector<StepOutput> steps;
    EncodedExample enc;
};

/// Teacher-forced pass: BOS feeds the first step, gold tokens feed the rest.
inline TrainForward forward_train(Graph& g, Model& m, const PreparedExample& pe) {
    if (pe.ex.question.empty() || pe.ex.answer.empty())
        throw DataError("forward_train: example must have a question and an answer");
    TrainForward out;
    out.enc = encode_context(g, m, pe);

    DecoderState state = init_state(g, m.params, out.enc.ctx.question_final,
                                    out.enc.ctx.attr_summary);
    const std::vector<TokenId>& targets = pe.ex.answer;
    std::vector<Value> dists;
    dists.reserve(targets.size());
    TokenId prev = kBosId;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        out.steps.push_back(decode_step(g, m.params, state, prev, out.enc.ctx));
        dists.push_back(out.steps.back().dist);
        prev = targets[t];
    }
    out.loss = nll_loss(g, dists, targets);
    for (TokenId y : targets)
        if (y != kPadId) ++out.target_tokens;
    return out;
}

struct Generation {
    std::vector<TokenId> tokens;    // BOS/EOS stripped
    double log_prob = 0.0;          // cumulative log-probability of the winning hypothesis
    double score = 0.0;             // length-normalized
    std::vector<double> gate_trace; // editing gate per emitted answer token
};

/// Beam-search generation. The gate trace is recovered by replaying the
/// winning token sequence, which reproduces the exact decode states.
inline Generation generate(Model& m, const PreparedExample& pe, std::size_t width,
                           std::size_t max_len) {
    Graph g;
    EncodedExample enc = encode_context(g, m, pe);

    auto stepper = [&](DecoderState state, TokenId prev) {
        StepOutput step = decode_step(g, m.params, state, prev, enc.ctx);
        std::vector<double> logp(step.dist.size());
        for (std::size_t i = 0; i < logp.size(); ++i)
            logp[i] = std::log(std::max(step.dist.val().data[i], 1e-12));
        return std::make_pair(state, std::move(logp));
    };
    DecoderState start = init_state(g, m.params, enc.ctx.question_final, enc.ctx.attr_summary);
    BeamResult best = beam_search(start, stepper, width, max_len);

    Generation gen;
    gen.tokens = best.tokens;
    gen.log_prob = best.log_prob;
    gen.score = best.score;

    DecoderState state = init_state(g, m.params, enc.ctx.question_final, enc.ctx.attr_summary);
    TokenId prev = kBosId;
    for (TokenId tok : gen.tokens) {
        StepOutput step = decode_step(g, m.params, state, prev, enc.ctx);
        gen.gate_trace.push_back(step.gate.scalar());
        prev = tok;
    }
    return gen;
}

// ---------------------------------------------------------------------------
// Plain-number diagnostics for the inspect surface.
// ---------------------------------------------------------------------------

struct ClusterDiagnostics {
    bool empty = false;
    std::vector<double> salience;                    // per review slot; zeros on padding
    std::vector<std::vector<double>> write_weights;  // per valid review, over slots
    std::vector<std::vector<double>> read_weights;   // per head, over slots
};

struct StepDiagnostics {
    double gate = 0.0;
    std::vector<double> question_attention;
    std::vector<double> skeleton_attention;
    std::vector<double> cluster_attention; // zeros on empty clusters
};

struct InspectReport {
    std::vector<ClusterDiagnostics> clusters;
    std::vector<TokenId> generated;
    double log_prob = 0.0;
    std::vector<StepDiagnostics> steps;
};

namespace detail {
inline std::vector<double> to_doubles(Value v) {
    return v.valid() ? v.val().data : std::vector<double>{};
}
} // namespace detail

inline ClusterDiagnostics cluster_diagnostics(const ReasoningResult& r, std::size_t cluster_size) {
    ClusterDiagnostics d;
    d.empty = r.empty;
    if (r.empty) {
        d.salience.assign(cluster_size, 0.0);
        return d;
    }
    d.salience = r.salience.val().data;
    for (const Value& w : r.write_weights) d.write_weights.push_back(w.val().data);
    for (const Value& w : r.read_weights) d.read_weights.push_back(w.val().data);
    return d;
}

/// Generate, then replay the winning sequence teacher-forced to export every
/// attention map and gate value behind the answer.
inline InspectReport inspect_example(Model& m, const PreparedExample& pe, std::size_t width,
                                     std::size_t max_len) {
    InspectReport rep;
    Generation gen = generate(m, pe, width, max_len);
    rep.generated = gen.tokens;
    rep.log_prob = gen.log_prob;

    Graph g;
    EncodedExample enc = encode_context(g, m, pe);
    for (const auto& r : enc.cluster_reasoning)
        rep.clusters.push_back(cluster_diagnostics(r, pe.clusters.n));

    DecoderState state = init_state(g, m.params, enc.ctx.question_final, enc.ctx.attr_summary);
    TokenId prev = kBosId;
    std::size_t k = enc.ctx.cluster_results.size();
    for (TokenId tok : gen.tokens) {
        StepOutput step = decode_step(g, m.params, state, prev, enc.ctx);
        StepDiagnostics sd;
        sd.gate = step.gate.scalar();
        sd.question_attention = detail::to_doubles(step.q_attn.weights);
        sd.skeleton_attention = detail::to_doubles(step.e_attn.weights);
        sd.cluster_attention = step.m_attn.weights.valid() ? step.m_attn.weights.val().data
                                                           : std::vector<double>(k, 0.0);
        rep.steps.push_back(std::move(sd));
        prev = tok;
    }
    return rep;
}

} // namespace mpag
