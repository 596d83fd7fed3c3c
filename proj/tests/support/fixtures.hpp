#pragma once

#include <string>
#include <vector>

#include "mpag/config.hpp"
#include "mpag/model.hpp"
#include "mpag/text.hpp"

namespace testsupport {

inline mpag::Config tiny_config(std::size_t hidden = 8, std::size_t embedding = 4,
                                std::size_t slots = 4, std::size_t heads = 2) {
    mpag::Config c = mpag::Config::desk_profile();
    c.hidden = hidden;
    c.embedding = embedding;
    c.slots = slots;
    c.read_heads = heads;
    c.widths = {1, 2};
    c.clusters = 2;
    c.cluster_size = 4;
    c.vocab_size = 64;
    return c;
}

inline mpag::Vocabulary vocab_of(const std::vector<std::string>& words) {
    mpag::Vocabulary v;
    for (const auto& w : words) v.push(w);
    return v;
}

inline std::vector<mpag::TokenId> ids_of(const mpag::Vocabulary& v,
                                         const std::string& sentence) {
    std::vector<mpag::TokenId> out;
    for (const auto& tok : mpag::tokenize(sentence)) out.push_back(v.id(tok));
    return out;
}

} // namespace testsupport
