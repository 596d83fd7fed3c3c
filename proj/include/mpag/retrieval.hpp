#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpag/errors.hpp"
#include "mpag/serialize.hpp"
#include "mpag/text.hpp"

namespace mpag {

constexpr const char* kIndexMagic = "MPAGIDX1";

/// Immutable lexical index over tokenized documents. Building keeps the raw
/// token lists; the on-disk format stores only the term statistics needed for
/// scoring.
class LexicalIndex {
  public:
    LexicalIndex() = default;

    static LexicalIndex build(std::vector<std::vector<std::string>> docs) {
        LexicalIndex idx;
        idx.docs_ = std::move(docs);
        idx.doc_counts_.reserve(idx.docs_.size());
        std::size_t total_len = 0;
        for (const auto& d : idx.docs_) {
            std::map<std::string, std::size_t> counts;
            for (const auto& t : d) ++counts[t];
            for (const auto& [t, c] : counts) ++idx.df_[t];
            total_len += d.size();
            idx.doc_lens_.push_back(d.size());
            idx.doc_counts_.push_back(std::move(counts));
        }
        idx.avg_len_ = idx.docs_.empty()
                           ? 0.0
                           : static_cast<double>(total_len) / static_cast<double>(idx.docs_.size());
        return idx;
    }

    std::size_t size() const { return doc_counts_.size(); }
    double avg_len() const { return avg_len_; }
    const std::vector<std::vector<std::string>>& docs() const { return docs_; }

    std::size_t df(const std::string& term) const {
        auto it = df_.find(term);
        return it == df_.end() ? 0 : it->second;
    }

    std::size_t term_count(std::size_t doc_id, const std::string& term) const {
        check_doc(doc_id);
        const auto& counts = doc_counts_[doc_id];
        auto it = counts.find(term);
        return it == counts.end() ? 0 : it->second;
    }

    std::size_t doc_len(std::size_t doc_id) const {
        check_doc(doc_id);
        return doc_lens_[doc_id];
    }

    /// BM25 with idf(t) = ln((D - df + 0.5)/(df + 0.5) + 1), which is always
    /// positive.
    double bm25_score(const std::vector<std::string>& query, std::size_t doc_id, double k1 = 1.2,
                      double b = 0.75) const {
        check_doc(doc_id);
        double dl = static_cast<double>(doc_lens_[doc_id]);
        double norm = avg_len_ > 0.0 ? dl / avg_len_ : 0.0;
        double d = static_cast<double>(size());
        double score = 0.0;
        for (const auto& term : query) {
            double tf = static_cast<double>(term_count(doc_id, term));
            if (tf == 0.0) continue;
            double dft = static_cast<double>(df(term));
            double idf = std::log((d - dft + 0.5) / (dft + 0.5) + 1.0);
            score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * norm));
        }
        return score;
    }

    /// Cosine between tf*idf vectors with idf(t) = ln(D/(1+df)) + 1.
    double tfidf_cosine(const std::vector<std::string>& query, std::size_t doc_id) const {
        check_doc(doc_id);
        double d = static_cast<double>(size());
        auto idf = [&](const std::string& t) {
            return std::log(d / (1.0 + static_cast<double>(df(t)))) + 1.0;
        };
        std::map<std::string, std::size_t> qcounts;
        for (const auto& t : query) ++qcounts[t];

        double dot = 0.0, qnorm = 0.0, dnorm = 0.0;
        for (const auto& [t, c] : qcounts) {
            double w = static_cast<double>(c) * idf(t);
            qnorm += w * w;
            double tf_d = static_cast<double>(term_count(doc_id, t));
            if (tf_d > 0.0) dot += w * tf_d * idf(t);
        }
        for (const auto& [t, c] : doc_counts_[doc_id]) {
            double w = static_cast<double>(c) * idf(t);
            dnorm += w * w;
        }
        if (qnorm == 0.0 || dnorm == 0.0) return 0.0;
        return dot / (std::sqrt(qnorm) * std::sqrt(dnorm));
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write index file: " + path);
        out.write(kIndexMagic, 8);
        write_u64(out, size());
        write_f64(out, avg_len_);
        // term table in map order, then per-document (term_idx, count) records
        std::unordered_map<std::string, std::uint64_t> term_idx;
        write_u64(out, df_.size());
        for (const auto& [t, c] : df_) {
            term_idx.emplace(t, term_idx.size());
            write_str(out, t);
            write_u64(out, c);
        }
        for (std::size_t i = 0; i < size(); ++i) {
            write_u64(out, doc_lens_[i]);
            write_u64(out, doc_counts_[i].size());
            for (const auto& [t, c] : doc_counts_[i]) {
                write_u64(out, term_idx.at(t));
                write_u64(out, c);
            }
        }
    }

    static LexicalIndex load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open index file: " + path);
        char magic[8];
        in.read(magic, 8);
        if (in.gcount() != 8 || std::string(magic, 8) != kIndexMagic)
            throw IoError("not an index file (bad magic): " + path);
        LexicalIndex idx;
        std::uint64_t n_docs = read_u64(in);
        idx.avg_len_ = read_f64(in);
        std::uint64_t n_terms = read_u64(in);
        std::vector<std::string> terms;
        terms.reserve(n_terms);
        for (std::uint64_t i = 0; i < n_terms; ++i) {
            std::string t = read_str(in);
            std::uint64_t c = read_u64(in);
            idx.df_[t] = c;
            terms.push_back(std::move(t));
        }
        for (std::uint64_t i = 0; i < n_docs; ++i) {
            idx.doc_lens_.push_back(read_u64(in));
            std::uint64_t n_entries = read_u64(in);
            std::map<std::string, std::size_t> counts;
            for (std::uint64_t e = 0; e < n_entries; ++e) {
                std::uint64_t ti = read_u64(in);
                std::uint64_t c = read_u64(in);
                if (ti >= terms.size()) throw IoError("corrupt index: term reference out of range");
                counts[terms[ti]] = c;
            }
            idx.doc_counts_.push_back(std::move(counts));
        }
        idx.docs_.resize(idx.doc_counts_.size()); // token order is not persisted
        return idx;
    }

  private:
    void check_doc(std::size_t doc_id) const {
        if (doc_id >= doc_counts_.size())
            throw DataError("unknown document id: " + std::to_string(doc_id));
    }

    std::vector<std::vector<std::string>> docs_;
    std::vector<std::map<std::string, std::size_t>> doc_counts_;
    std::vector<std::size_t> doc_lens_;
    std::map<std::string, std::size_t> df_;
    double avg_len_ = 0.0;
};

/// Index over training questions for prototype lookup.
struct QaIndex {
    LexicalIndex index;
    std::vector<std::string> ids;
    std::vector<std::string> questions;
    std::vector<std::string> answers;

    template <typename Records>
    static QaIndex build(const Records& records) {
        QaIndex qa;
        std::vector<std::vector<std::string>> docs;
        for (const auto& rec : records) {
            docs.push_back(tokenize(rec.question));
            qa.ids.push_back(rec.id);
            qa.questions.push_back(rec.question);
            qa.answers.push_back(rec.answer);
        }
        qa.index = LexicalIndex::build(std::move(docs));
        return qa;
    }
};

struct PrototypePair {
    std::string question;
    std::string answer;
    std::size_t doc_index;
};

/// BM25 top-1 training question excluding the example's own id; ties go to
/// the lower document index. Throws DataError when nothing but the example
/// itself is indexed.
inline PrototypePair retrieve_prototype(const std::vector<std::string>& question_tokens,
                                        const QaIndex& qa, const std::string& self_id,
                                        double k1 = 1.2, double b = 0.75) {
    bool found = false;
    double best = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < qa.index.size(); ++i) {
        if (qa.ids[i] == self_id) continue;
        double s = qa.index.bm25_score(question_tokens, i, k1, b);
        if (!found || s > best) {
            found = true;
            best = s;
            arg = i;
        }
    }
    if (!found) throw DataError("no prototype available: index holds no other example");
    return {qa.questions[arg], qa.answers[arg], arg};
}

/// Extractive baseline: the top-scoring review under BM25 or TF-IDF, ties to
/// the lowest index.
enum class BaselineMethod { Bm25, Tfidf };

inline std::vector<std::string> baseline_answer(const std::vector<std::string>& question_tokens,
                                                const std::vector<std::vector<std::string>>& reviews,
                                                BaselineMethod method, double k1 = 1.2,
                                                double b = 0.75) {
    if (reviews.empty()) throw DataError("baseline_answer: no reviews to rank");
    LexicalIndex idx = LexicalIndex::build(reviews);
    double best = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < reviews.size(); ++i) {
        double s = method == BaselineMethod::Bm25 ? idx.bm25_score(question_tokens, i, k1, b)
                                                  : idx.tfidf_cosine(question_tokens, i);
        if (i == 0 || s > best) {
            best = s;
            arg = i;
        }
    }
    return reviews[arg];
}

} // namespace mpag
