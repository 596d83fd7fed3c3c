#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpag/errors.hpp"

namespace mpag {

using TokenId = std::uint32_t;

constexpr TokenId kPadId = 0;
constexpr TokenId kUnkId = 1;
constexpr TokenId kBosId = 2;
constexpr TokenId kEosId = 3;
constexpr std::size_t kNumReserved = 4;

/// Whitespace split with ASCII lowercasing. Multi-byte sequences (CJK etc.)
/// pass through untouched; the corpora this feeds are pre-segmented.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

class Vocabulary {
  public:
    Vocabulary() {
        for (const char* t : {"<pad>", "<unk>", "<bos>", "<eos>"}) push(t);
    }

    /// Keeps the most frequent tokens, ties broken lexicographically.
    /// max_size counts the four reserved entries.
    static Vocabulary build(const std::vector<std::vector<std::string>>& streams,
                            std::size_t max_size, std::size_t min_count = 1) {
        if (max_size <= kNumReserved)
            throw ConfigError("vocabulary max_size must exceed the reserved entries");
        std::map<std::string, std::size_t> counts;
        for (const auto& stream : streams)
            for (const auto& tok : stream) ++counts[tok];

        std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });

        Vocabulary v;
        for (const auto& [tok, cnt] : ranked) {
            if (v.size() >= max_size) break;
            if (cnt < min_count) break;
            v.push(tok);
        }
        return v;
    }

    TokenId id(const std::string& token) const {
        auto it = map_.find(token);
        return it == map_.end() ? kUnkId : it->second;
    }

    const std::string& token(TokenId id) const {
        if (id >= tokens_.size()) throw DataError("token id out of range: " + std::to_string(id));
        return tokens_[id];
    }

    bool contains(const std::string& token) const { return map_.count(token) != 0; }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    /// Used only for deserialization; tokens must arrive in id order.
    void push(const std::string& token) {
        if (map_.count(token)) throw DataError("duplicate vocabulary token: " + token);
        map_.emplace(token, static_cast<TokenId>(tokens_.size()));
        tokens_.push_back(token);
    }

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> map_;
};

/// Truncate to max_len ids; when add_eos is set the EOS id occupies the final
/// slot. No padding happens here.
inline std::vector<TokenId> to_ids(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                                   std::size_t max_len, bool add_eos) {
    if (max_len < 1) throw ConfigError("to_ids: max_len must be >= 1");
    std::vector<TokenId> out;
    std::size_t budget = add_eos ? max_len - 1 : max_len;
    for (std::size_t i = 0; i < tokens.size() && i < budget; ++i) out.push_back(vocab.id(tokens[i]));
    if (add_eos) out.push_back(kEosId);
    return out;
}

inline std::vector<std::string> detokenize(const std::vector<TokenId>& ids,
                                           const Vocabulary& vocab) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (TokenId id : ids) out.push_back(vocab.token(id));
    return out;
}

/// Raw term counts over non-reserved vocabulary ids.
inline std::map<TokenId, std::size_t> bow_vector(const std::vector<std::string>& tokens,
                                                 const Vocabulary& vocab) {
    std::map<TokenId, std::size_t> counts;
    for (const auto& tok : tokens) {
        TokenId id = vocab.id(tok);
        if (id >= kNumReserved) ++counts[id];
    }
    return counts;
}

} // namespace mpag
