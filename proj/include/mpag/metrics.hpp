#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpag/errors.hpp"
#include "mpag/tensor.hpp"
#include "mpag/text.hpp"

namespace mpag {

struct BleuScore {
    double overall = 0.0;        // percent
    std::vector<double> per_n;   // BLEU-1..max_n, percent, each BP * p_n
};

namespace detail {

inline std::map<std::vector<std::string>, std::size_t> ngram_counts(
    const std::vector<std::string>& tokens, std::size_t n) {
    std::map<std::vector<std::string>, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
    return counts;
}

} // namespace detail

/// Corpus BLEU with clipped modified precision, brevity penalty
/// min(1, e^(1 - r/c)) and add-one smoothing on zero counts for n >= 2.
/// Candidates with no n-grams at some order contribute vacuously (p_n = 1
/// only when the whole corpus has no n-grams of that order).
inline BleuScore bleu(const std::vector<std::vector<std::string>>& candidates,
                      const std::vector<std::vector<std::string>>& references,
                      std::size_t max_n = 4) {
    if (candidates.empty()) throw DataError("bleu: empty candidate list");
    if (candidates.size() != references.size())
        throw DataError("bleu: candidate and reference counts differ");

    std::vector<double> clipped(max_n, 0.0), total(max_n, 0.0);
    std::size_t cand_len = 0, ref_len = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        cand_len += candidates[i].size();
        ref_len += references[i].size();
        for (std::size_t n = 1; n <= max_n; ++n) {
            auto cc = detail::ngram_counts(candidates[i], n);
            auto rc = detail::ngram_counts(references[i], n);
            for (const auto& [gram, c] : cc) {
                total[n - 1] += static_cast<double>(c);
                auto it = rc.find(gram);
                if (it != rc.end()) clipped[n - 1] += static_cast<double>(std::min(c, it->second));
            }
        }
    }

    double bp = 1.0;
    if (cand_len == 0) bp = 0.0;
    else if (cand_len < ref_len)
        bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));

    std::vector<double> precision(max_n, 0.0);
    for (std::size_t n = 1; n <= max_n; ++n) {
        double c = clipped[n - 1], t = total[n - 1];
        if (t == 0.0) {
            precision[n - 1] = 1.0; // no n-grams of this order exist to get wrong
        } else if (c == 0.0 && n >= 2) {
            precision[n - 1] = 1.0 / (t + 1.0); // add-one smoothing
        } else {
            precision[n - 1] = c / t;
        }
    }

    BleuScore out;
    out.per_n.resize(max_n);
    for (std::size_t n = 1; n <= max_n; ++n) out.per_n[n - 1] = 100.0 * bp * precision[n - 1];
    bool zero = false;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        if (precision[n - 1] <= 0.0) zero = true;
        else log_sum += std::log(precision[n - 1]);
    }
    out.overall = zero ? 0.0 : 100.0 * bp * std::exp(log_sum / static_cast<double>(max_n));
    return out;
}

/// Word vectors for the embedding metrics; unknown tokens fall back to the
/// UNK row.
struct EmbeddingTable {
    Tensor matrix; // V x D
    std::unordered_map<std::string, std::size_t> row_of;

    std::vector<double> vec(const std::string& token) const {
        auto it = row_of.find(token);
        std::size_t r = it == row_of.end() ? static_cast<std::size_t>(kUnkId) : it->second;
        std::size_t d = matrix.cols();
        return std::vector<double>(matrix.data.begin() + static_cast<long>(r * d),
                                   matrix.data.begin() + static_cast<long>((r + 1) * d));
    }

    static EmbeddingTable from_vocab(Tensor matrix, const std::vector<std::string>& tokens) {
        EmbeddingTable t;
        t.matrix = std::move(matrix);
        for (std::size_t i = 0; i < tokens.size(); ++i) t.row_of.emplace(tokens[i], i);
        return t;
    }
};

namespace detail {

inline double cosine_plain(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return d / (std::sqrt(na) * std::sqrt(nb));
}

inline std::vector<double> mean_vec(const std::vector<std::vector<double>>& vs) {
    std::vector<double> m(vs[0].size(), 0.0);
    for (const auto& v : vs)
        for (std::size_t i = 0; i < v.size(); ++i) m[i] += v[i];
    for (double& x : m) x /= static_cast<double>(vs.size());
    return m;
}

inline std::vector<double> extreme_vec(const std::vector<std::vector<double>>& vs) {
    std::vector<double> e = vs[0];
    for (std::size_t k = 1; k < vs.size(); ++k)
        for (std::size_t i = 0; i < e.size(); ++i) {
            double v = vs[k][i];
            if (std::abs(v) > std::abs(e[i]) ||
                (std::abs(v) == std::abs(e[i]) && v > e[i]))
                e[i] = v;
        }
    return e;
}

inline double greedy_directed(const std::vector<std::vector<double>>& from,
                              const std::vector<std::vector<double>>& to) {
    double acc = 0.0;
    for (const auto& f : from) {
        double best = -1.0;
        for (const auto& t : to) best = std::max(best, cosine_plain(f, t));
        acc += best;
    }
    return acc / static_cast<double>(from.size());
}

} // namespace detail

struct EmbeddingScores {
    double average = 0.0;
    double greedy = 0.0;
    double extreme = 0.0;
    std::size_t pairs_scored = 0;
    std::size_t pairs_skipped = 0; // empty candidate or reference
};

/// Average: cosine of sentence mean vectors. Greedy: symmetric greedy token
/// matching. Extreme: cosine of per-dimension max-magnitude vectors. Corpus
/// values are means over scored pairs; empty sentences skip the pair.
inline EmbeddingScores embedding_metrics(const std::vector<std::vector<std::string>>& candidates,
                                         const std::vector<std::vector<std::string>>& references,
                                         const EmbeddingTable& table) {
    if (candidates.size() != references.size())
        throw DataError("embedding_metrics: candidate and reference counts differ");
    EmbeddingScores out;
    double sa = 0, sg = 0, se = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].empty() || references[i].empty()) {
            ++out.pairs_skipped;
            continue;
        }
        std::vector<std::vector<double>> cv, rv;
        for (const auto& t : candidates[i]) cv.push_back(table.vec(t));
        for (const auto& t : references[i]) rv.push_back(table.vec(t));

        sa += detail::cosine_plain(detail::mean_vec(cv), detail::mean_vec(rv));
        sg += 0.5 * (detail::greedy_directed(cv, rv) + detail::greedy_directed(rv, cv));
        se += detail::cosine_plain(detail::extreme_vec(cv), detail::extreme_vec(rv));
        ++out.pairs_scored;
    }
    if (out.pairs_scored > 0) {
        double n = static_cast<double>(out.pairs_scored);
        out.average = sa / n;
        out.greedy = sg / n;
        out.extreme = se / n;
    }
    return out;
}

/// Unique n-grams across the whole candidate corpus over total n-grams;
/// zero when no n-grams exist.
inline double distinct_n(const std::vector<std::vector<std::string>>& candidates, std::size_t n) {
    if (n < 1) throw ConfigError("distinct_n: n must be >= 1");
    std::map<std::vector<std::string>, std::size_t> seen;
    std::size_t total = 0;
    for (const auto& cand : candidates) {
        for (const auto& [gram, c] : detail::ngram_counts(cand, n)) {
            seen[gram] += c;
            total += c;
        }
    }
    if (total == 0) return 0.0;
    return static_cast<double>(seen.size()) / static_cast<double>(total);
}

struct MetricReport {
    double bleu_overall = 0.0;
    std::vector<double> bleu_n;     // BLEU-1..4, percent
    double emb_average = 0.0;
    double emb_greedy = 0.0;
    double emb_extreme = 0.0;
    std::vector<double> distinct;   // distinct-1..4 on [0,1]
    std::size_t pairs = 0;
    std::size_t pairs_skipped_embedding = 0;
};

inline MetricReport evaluate_corpus(const std::vector<std::vector<std::string>>& candidates,
                                    const std::vector<std::vector<std::string>>& references,
                                    const EmbeddingTable& table) {
    MetricReport rep;
    BleuScore b = bleu(candidates, references);
    rep.bleu_overall = b.overall;
    rep.bleu_n = b.per_n;
    EmbeddingScores e = embedding_metrics(candidates, references, table);
    rep.emb_average = e.average;
    rep.emb_greedy = e.greedy;
    rep.emb_extreme = e.extreme;
    rep.pairs = candidates.size();
    rep.pairs_skipped_embedding = e.pairs_skipped;
    for (std::size_t n = 1; n <= 4; ++n) rep.distinct.push_back(distinct_n(candidates, n));
    return rep;
}

} // namespace mpag
