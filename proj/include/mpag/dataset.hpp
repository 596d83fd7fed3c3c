#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpag/cluster.hpp"
#include "mpag/errors.hpp"
#include "mpag/text.hpp"

namespace mpag {

constexpr std::size_t kMaxReviews = 100;

/// One dataset record as read from disk, token strings untouched.
struct RawRecord {
    std::string id;
    std::string question;
    std::string answer;
    std::vector<std::string> reviews;
    std::vector<double> review_scores;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::optional<std::string> prototype_question;
    std::optional<std::string> prototype_answer;
    std::optional<std::vector<std::vector<long>>> clusters; // cached by `prepare`
};

/// One instance in id space, ready for the model.
struct Example {
    std::string id;
    std::vector<TokenId> question;
    std::vector<TokenId> answer;
    std::vector<std::vector<TokenId>> reviews;
    std::vector<std::pair<TokenId, TokenId>> attributes;
    std::vector<TokenId> prototype_question; // empty when no prototype exists
    std::vector<TokenId> prototype_answer;
};

namespace detail {

inline std::string where(const std::string& path, std::size_t line_no) {
    return path + ":" + std::to_string(line_no);
}

inline std::string require_string(const nlohmann::json& obj, const char* field,
                                  const std::string& at) {
    if (!obj.contains(field))
        throw DataError(at + ": missing required field \"" + field + "\"");
    if (!obj[field].is_string())
        throw DataError(at + ": field \"" + field + "\" must be a string");
    return obj[field].get<std::string>();
}

} // namespace detail

/// Reads one JSON object per line. Records lacking a question or answer are
/// rejected with their line number; reviews are truncated to kMaxReviews.
inline std::vector<RawRecord> load_raw_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path);

    std::vector<RawRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string at = detail::where(path, line_no);

        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(at + ": malformed JSON: " + e.what());
        }
        if (!obj.is_object()) throw DataError(at + ": expected a JSON object");

        RawRecord rec;
        rec.id = detail::require_string(obj, "id", at);
        rec.question = detail::require_string(obj, "question", at);
        rec.answer = detail::require_string(obj, "answer", at);
        if (tokenize(rec.question).empty())
            throw DataError(at + ": field \"question\" must be non-empty");
        if (tokenize(rec.answer).empty())
            throw DataError(at + ": field \"answer\" must be non-empty");

        if (obj.contains("reviews")) {
            if (!obj["reviews"].is_array())
                throw DataError(at + ": field \"reviews\" must be an array of strings");
            for (const auto& r : obj["reviews"]) {
                if (!r.is_string())
                    throw DataError(at + ": field \"reviews\" must contain only strings");
                rec.reviews.push_back(r.get<std::string>());
            }
        }
        if (obj.contains("review_scores")) {
            if (!obj["review_scores"].is_array())
                throw DataError(at + ": field \"review_scores\" must be an array of numbers");
            for (const auto& s : obj["review_scores"]) {
                if (!s.is_number())
                    throw DataError(at + ": field \"review_scores\" must contain only numbers");
                rec.review_scores.push_back(s.get<double>());
            }
            if (rec.review_scores.size() != rec.reviews.size())
                throw DataError(at + ": \"review_scores\" length must match \"reviews\"");
        } else {
            rec.review_scores.assign(rec.reviews.size(), 1.0);
        }
        if (rec.reviews.size() > kMaxReviews) {
            rec.reviews.resize(kMaxReviews);
            rec.review_scores.resize(kMaxReviews);
        }

        if (obj.contains("attributes")) {
            if (!obj["attributes"].is_array())
                throw DataError(at + ": field \"attributes\" must be an array");
            for (const auto& a : obj["attributes"]) {
                if (!a.is_object())
                    throw DataError(at + ": attribute entries must be objects");
                std::string key = detail::require_string(a, "key", at);
                std::string value = detail::require_string(a, "value", at);
                if (tokenize(key).size() != 1)
                    throw DataError(at + ": attribute \"key\" must be a single token: " + key);
                if (tokenize(value).size() != 1)
                    throw DataError(at + ": attribute \"value\" must be a single token: " + value);
                rec.attributes.emplace_back(key, value);
            }
        }

        if (obj.contains("prototype_question"))
            rec.prototype_question = detail::require_string(obj, "prototype_question", at);
        if (obj.contains("prototype_answer"))
            rec.prototype_answer = detail::require_string(obj, "prototype_answer", at);

        if (obj.contains("clusters")) {
            if (!obj["clusters"].is_array())
                throw DataError(at + ": field \"clusters\" must be an array of index arrays");
            std::vector<std::vector<long>> clusters;
            for (const auto& c : obj["clusters"]) {
                if (!c.is_array())
                    throw DataError(at + ": field \"clusters\" must be an array of index arrays");
                std::vector<long> idx;
                for (const auto& i : c) {
                    if (!i.is_number_integer())
                        throw DataError(at + ": cluster members must be integer review indices");
                    long v = i.get<long>();
                    if (v < 0 || v >= static_cast<long>(rec.reviews.size()))
                        throw DataError(at + ": cluster member index out of range: " +
                                        std::to_string(v));
                    idx.push_back(v);
                }
                clusters.push_back(std::move(idx));
            }
            rec.clusters = std::move(clusters);
        }

        out.push_back(std::move(rec));
    }
    return out;
}

inline void save_raw_dataset(const std::vector<RawRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset file: " + path);
    for (const RawRecord& rec : records) {
        nlohmann::json obj;
        obj["id"] = rec.id;
        obj["question"] = rec.question;
        obj["answer"] = rec.answer;
        obj["reviews"] = rec.reviews;
        if (!rec.review_scores.empty()) obj["review_scores"] = rec.review_scores;
        nlohmann::json attrs = nlohmann::json::array();
        for (const auto& [k, v] : rec.attributes) attrs.push_back({{"key", k}, {"value", v}});
        obj["attributes"] = attrs;
        if (rec.prototype_question) obj["prototype_question"] = *rec.prototype_question;
        if (rec.prototype_answer) obj["prototype_answer"] = *rec.prototype_answer;
        if (rec.clusters) obj["clusters"] = *rec.clusters;
        out << obj.dump() << "\n";
    }
}

/// Tokenize and map a record into id space under the configured length caps.
inline Example encode_example(const RawRecord& rec, const Vocabulary& vocab,
                              std::size_t max_q_len, std::size_t max_a_len,
                              std::size_t max_r_len) {
    Example ex;
    ex.id = rec.id;
    ex.question = to_ids(tokenize(rec.question), vocab, max_q_len, false);
    ex.answer = to_ids(tokenize(rec.answer), vocab, max_a_len, true);
    for (const auto& r : rec.reviews) ex.reviews.push_back(to_ids(tokenize(r), vocab, max_r_len, false));
    for (const auto& [k, v] : rec.attributes)
        ex.attributes.emplace_back(vocab.id(tokenize(k)[0]), vocab.id(tokenize(v)[0]));
    if (rec.prototype_question && !tokenize(*rec.prototype_question).empty())
        ex.prototype_question = to_ids(tokenize(*rec.prototype_question), vocab, max_q_len, false);
    if (rec.prototype_answer && !tokenize(*rec.prototype_answer).empty())
        ex.prototype_answer = to_ids(tokenize(*rec.prototype_answer), vocab, max_a_len, false);
    return ex;
}

/// Load and encode in one step for callers that already hold a vocabulary.
inline std::vector<Example> load_dataset(const std::string& path, const Vocabulary& vocab,
                                         std::size_t max_q_len = 25, std::size_t max_a_len = 25,
                                         std::size_t max_r_len = 30) {
    std::vector<Example> out;
    for (const RawRecord& rec : load_raw_dataset(path))
        out.push_back(encode_example(rec, vocab, max_q_len, max_a_len, max_r_len));
    return out;
}

/// Token streams feeding vocabulary construction: questions, answers,
/// reviews and attribute tokens of every record.
inline std::vector<std::vector<std::string>> vocab_streams(const std::vector<RawRecord>& records) {
    std::vector<std::vector<std::string>> streams;
    for (const RawRecord& rec : records) {
        streams.push_back(tokenize(rec.question));
        streams.push_back(tokenize(rec.answer));
        for (const auto& r : rec.reviews) streams.push_back(tokenize(r));
        std::vector<std::string> attr_tokens;
        for (const auto& [k, v] : rec.attributes) {
            attr_tokens.push_back(tokenize(k)[0]);
            attr_tokens.push_back(tokenize(v)[0]);
        }
        if (!attr_tokens.empty()) streams.push_back(std::move(attr_tokens));
    }
    return streams;
}

} // namespace mpag
