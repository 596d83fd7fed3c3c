#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpag/cluster.hpp"
#include "mpag/config.hpp"
#include "mpag/encoders.hpp"
#include "mpag/graph.hpp"
#include "mpag/nn.hpp"

namespace mpag {

/// Slot matrix of the review reasoning memory. Slots are held as separate
/// H-vectors so per-slot updates stay cheap graph operations.
struct MemorySlots {
    std::vector<Value> slots;

    static MemorySlots zeros(Graph& g, std::size_t num_slots, std::size_t h_dim) {
        MemorySlots m;
        Value z = g.constant(Tensor::zeros({h_dim}));
        m.slots.assign(num_slots, z);
        return m;
    }
};

/// Slot-update algebra: m_j <- m_j * (1 - pi_j * E) + pi_j * v.
/// Exposed separately from write_step so the exact-arithmetic oracles can
/// inject one-hot weights and extreme erase vectors.
inline MemorySlots apply_write(Graph& g, const MemorySlots& m, Value weights, Value content,
                               Value erase) {
    if (weights.size() != m.slots.size())
        throw ShapeError("apply_write: weight count does not match slot count");
    Value ones = g.constant(Tensor::full({content.size()}, 1.0));
    MemorySlots out;
    out.slots.reserve(m.slots.size());
    for (std::size_t j = 0; j < m.slots.size(); ++j) {
        Value pj = pick(weights, j);
        Value keep = sub(ones, scale_by(erase, pj));
        out.slots.push_back(add(mul(m.slots[j], keep), scale_by(content, pj)));
    }
    return out;
}

/// Convex slot readout r = sum_j pi_j m_j.
inline Value apply_read(const MemorySlots& m, Value weights) {
    if (weights.size() != m.slots.size())
        throw ShapeError("apply_read: weight count does not match slot count");
    std::vector<Value> weighted;
    weighted.reserve(m.slots.size());
    for (std::size_t j = 0; j < m.slots.size(); ++j)
        weighted.push_back(scale_by(m.slots[j], pick(weights, j)));
    return add_n(weighted);
}

/// Cosine addressing over slots. The zero-norm fallback (similarity 0) keeps
/// the first write on an all-zero memory well defined: equal logits give a
/// uniform distribution.
inline Value address_slots(const MemorySlots& m, Value key) {
    std::vector<Value> sims;
    sims.reserve(m.slots.size());
    for (const Value& slot : m.slots) sims.push_back(cosine(key, slot));
    return softmax(concat(std::span<const Value>(sims)));
}

/// One memory write driven by a review representation: key/content/erase are
/// dense projections of the input state.
inline MemorySlots write_step(Graph& g, ParamStore& ps, const MemorySlots& m, Value review_state,
                              Value* out_weights = nullptr) {
    Value key = dense(g, ps, "mem.wkey", review_state);
    Value weights = address_slots(m, key);
    Value content = dense(g, ps, "mem.wval", review_state);
    Value erase = sigmoid(dense(g, ps, "mem.werase", review_state));
    if (out_weights) *out_weights = weights;
    return apply_write(g, m, weights, content, erase);
}

/// Multi-head read: T independent keys, each a convex readout; the cluster
/// reasoning result mixes the chain state with the concatenated readouts.
inline Value read_multihead(Graph& g, ParamStore& ps, const MemorySlots& m, Value last_state,
                            std::size_t heads, std::vector<Value>* out_weights = nullptr) {
    if (heads < 1) throw ConfigError("read_multihead: need at least one head");
    std::vector<Value> readouts;
    readouts.reserve(heads);
    for (std::size_t t = 0; t < heads; ++t) {
        Value key = dense(g, ps, "mem.read" + std::to_string(t), last_state);
        Value weights = address_slots(m, key);
        if (out_weights) out_weights->push_back(weights);
        readouts.push_back(apply_read(m, weights));
    }
    Value merged = readouts.size() == 1 ? readouts[0] : concat(std::span<const Value>(readouts));
    return add(matvec(g.param(ps, "mem.out.Wnu"), last_state),
               matvec(g.param(ps, "mem.out.Wr"), merged));
}

/// Full reasoning pass over one cluster plus the diagnostics the inspect
/// surface exports.
struct ReasoningResult {
    Value output;                        // o^r, H
    Value salience;                      // g over the cluster's N slots
    std::vector<Value> write_weights;    // one per valid review, in order
    std::vector<Value> read_weights;     // one per head
    std::vector<std::uint8_t> valid;
    bool empty = false;
};

/// Signals an all-padded cluster; the caller substitutes a zero reasoning
/// result and masks the cluster out of the decoder's cluster attention.
struct EmptyClusterSignal {};

inline ReasoningResult reason_cluster(Graph& g, ParamStore& ps, const Config& cfg,
                                      const std::vector<const std::vector<TokenId>*>& reviews,
                                      const std::vector<std::uint8_t>& valid,
                                      Value question_final) {
    bool any_valid = false;
    for (auto v : valid) any_valid = any_valid || v;
    if (!any_valid) throw EmptyClusterSignal{};

    std::vector<Value> review_vecs(valid.size());
    for (std::size_t i = 0; i < valid.size(); ++i)
        if (valid[i]) review_vecs[i] = encode_review(g, ps, *reviews[i], cfg.widths);

    ClusterEncoding chain = sru_chain(g, ps, review_vecs, valid, question_final);

    ReasoningResult res;
    res.valid = valid;
    res.salience = chain.salience;
    MemorySlots mem = MemorySlots::zeros(g, cfg.slots, cfg.hidden);
    for (std::size_t i = 0; i < valid.size(); ++i) {
        if (!valid[i]) continue;
        Value w;
        mem = write_step(g, ps, mem, chain.states[i], &w);
        res.write_weights.push_back(w);
    }
    res.output = read_multihead(g, ps, mem, chain.last_state, cfg.read_heads, &res.read_weights);
    return res;
}

inline void register_memory_params(ParamStore& ps, const Config& cfg, Rng& rng) {
    std::size_t h = cfg.hidden;
    register_dense(ps, "mem.wkey", h, h, rng);
    register_dense(ps, "mem.wval", h, h, rng);
    register_dense(ps, "mem.werase", h, h, rng);
    for (std::size_t t = 0; t < cfg.read_heads; ++t)
        register_dense(ps, "mem.read" + std::to_string(t), h, h, rng);
    init_matrix(ps.add("mem.out.Wnu", {h, h}), rng);
    init_matrix(ps.add("mem.out.Wr", {h, cfg.read_heads * h}), rng);
}

} // namespace mpag
