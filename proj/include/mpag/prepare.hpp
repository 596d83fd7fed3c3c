#pragma once

#include <string>
#include <vector>

#include "mpag/cluster.hpp"
#include "mpag/config.hpp"
#include "mpag/dataset.hpp"
#include "mpag/model.hpp"
#include "mpag/retrieval.hpp"

namespace mpag {

/// Fill missing prototype pairs (BM25 over the dataset's own questions,
/// self excluded) and missing cluster assignments. Records that already carry
/// these fields keep them, so a prepared file loads without recomputation.
inline void ensure_prepared(std::vector<RawRecord>& records, const Config& cfg) {
    bool need_prototypes = false;
    for (const auto& rec : records)
        need_prototypes = need_prototypes || !rec.prototype_question || !rec.prototype_answer;

    if (need_prototypes) {
        QaIndex qa = QaIndex::build(records);
        for (auto& rec : records) {
            if (rec.prototype_question && rec.prototype_answer) continue;
            try {
                PrototypePair p = retrieve_prototype(tokenize(rec.question), qa, rec.id,
                                                     cfg.bm25_k1, cfg.bm25_b);
                rec.prototype_question = p.question;
                rec.prototype_answer = p.answer;
            } catch (const DataError&) {
                // nothing but the example itself indexed; leave the prototype
                // empty and let the reader fall back to the zero skeleton
            }
        }
    }

    Vocabulary vocab = Vocabulary::build(vocab_streams(records), cfg.vocab_size);
    for (auto& rec : records) {
        if (rec.clusters && rec.clusters->size() == cfg.clusters) continue;
        ReviewClusters rc = cluster_reviews(rec, vocab, cfg);
        std::vector<std::vector<long>> cached(rc.k);
        for (std::size_t c = 0; c < rc.k; ++c)
            for (std::size_t j = 0; j < rc.n; ++j)
                if (rc.valid[c][j]) cached[c].push_back(rc.member_index[c][j]);
        rec.clusters = std::move(cached);
    }
}

} // namespace mpag
