#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mpag/retrieval.hpp"

using namespace mpag;

TEST_CASE("bm25 hand-evaluated closed formula") {
    auto idx = LexicalIndex::build({{"a", "b"}});
    // D=1, df(a)=1: idf = ln((1-1+0.5)/(1+0.5) + 1) = ln(4/3);
    // tf=1, dl=avgdl: score = idf * (1*2.2)/(1+1.2*(1-0.75+0.75)) = idf
    double expect = std::log(4.0 / 3.0);
    CHECK(std::abs(idx.bm25_score({"a"}, 0) - expect) < 1e-9);
    CHECK(idx.bm25_score({"zz"}, 0) == 0.0);
}

TEST_CASE("bm25 term duplication strictly increases the score") {
    auto idx1 = LexicalIndex::build({{"a", "b", "c"}, {"x", "y"}});
    auto idx2 = LexicalIndex::build({{"a", "a", "b"}, {"x", "y"}});
    CHECK(idx2.bm25_score({"a"}, 0) > idx1.bm25_score({"a"}, 0));
}

TEST_CASE("bm25 and tfidf are invariant to query token order") {
    auto idx = LexicalIndex::build({{"a", "b", "c", "a"}, {"b", "d"}});
    CHECK(idx.bm25_score({"a", "b", "d"}, 0) == idx.bm25_score({"d", "a", "b"}, 0));
    CHECK(idx.tfidf_cosine({"a", "b", "d"}, 0) == idx.tfidf_cosine({"d", "b", "a"}, 0));
}

TEST_CASE("unknown document id throws") {
    auto idx = LexicalIndex::build({{"a"}});
    CHECK_THROWS_AS(idx.bm25_score({"a"}, 5), DataError);
    CHECK_THROWS_AS(idx.tfidf_cosine({"a"}, 1), DataError);
}

TEST_CASE("tfidf cosine identity and disjoint cases") {
    auto idx = LexicalIndex::build({{"a", "b"}, {"c", "d"}, {"a", "c"}});
    CHECK(std::abs(idx.tfidf_cosine({"a", "b"}, 0) - 1.0) < 1e-9);
    CHECK(idx.tfidf_cosine({"x", "y"}, 0) == 0.0);
}

TEST_CASE("tfidf cosine matches hand arithmetic on a three-doc fixture") {
    // docs: d0 = [a b], d1 = [a a c], d2 = [b]; query = [a b]
    // D=3; idf(a) = ln(3/3)+1 = 1; idf(b) = ln(3/3)+1 = 1; idf(c) = ln(3/2)+1
    // q vector: a:1*1, b:1*1 -> norm sqrt(2)
    // d1 vector: a:2*1, c:1*idf_c -> dot(q,d1) = 2
    auto idx = LexicalIndex::build({{"a", "b"}, {"a", "a", "c"}, {"b"}});
    double idf_c = std::log(3.0 / 2.0) + 1.0;
    double expect = 2.0 / (std::sqrt(2.0) * std::sqrt(4.0 + idf_c * idf_c));
    CHECK(std::abs(idx.tfidf_cosine({"a", "b"}, 1) - expect) < 1e-12);
}

namespace {
struct MiniRec {
    std::string id, question, answer;
};
} // namespace

TEST_CASE("prototype retrieval") {
    std::vector<MiniRec> recs = {
        {"q0", "does it leak water", "no it does not"},
        {"q1", "is the cup heavy", "quite light"},
        {"q2", "does it keep water hot", "yes for hours"},
        {"q3", "what color is it", "transparent"},
        {"q4", "how big is the cup", "around 400ml"},
    };
    auto qa = QaIndex::build(recs);

    SECTION("exact question match wins (excluding self)") {
        auto p = retrieve_prototype(tokenize("is the cup heavy"), qa, "q9");
        CHECK(p.doc_index == 1);
        CHECK(p.answer == "quite light");
    }

    SECTION("self id is never returned") {
        auto p = retrieve_prototype(tokenize("is the cup heavy"), qa, "q1");
        CHECK(p.doc_index != 1);
    }

    SECTION("only self indexed -> error") {
        auto solo = QaIndex::build(std::vector<MiniRec>{{"q0", "anything", "a"}});
        CHECK_THROWS_AS(retrieve_prototype(tokenize("anything"), solo, "q0"), DataError);
    }

    SECTION("two-question fixture: higher overlap wins, verified by hand scores") {
        std::vector<MiniRec> two = {
            {"a", "red green blue", "ans-a"},
            {"b", "red green yellow", "ans-b"},
        };
        auto idx2 = QaIndex::build(two);
        auto query = tokenize("red green yellow");
        double s0 = idx2.index.bm25_score(query, 0);
        double s1 = idx2.index.bm25_score(query, 1);
        CHECK(s1 > s0);
        auto p = retrieve_prototype(query, idx2, "none");
        CHECK(p.doc_index == 1);
    }
}

TEST_CASE("baseline answer selection") {
    SECTION("single review returned as-is") {
        auto r = baseline_answer(tokenize("any question"), {tokenize("the only review")},
                                 BaselineMethod::Bm25);
        CHECK(r == tokenize("the only review"));
    }

    SECTION("all-zero scores fall back to the first review") {
        auto r = baseline_answer(tokenize("zz"), {tokenize("a b"), tokenize("c d")},
                                 BaselineMethod::Bm25);
        CHECK(r == tokenize("a b"));
    }

    SECTION("planted high-overlap review beats distractors") {
        std::vector<std::vector<std::string>> reviews = {
            tokenize("nothing relevant here"),
            tokenize("does it leak water no it never leaks water"),
            tokenize("shipping was fast"),
        };
        auto q = tokenize("does it leak water");
        CHECK(baseline_answer(q, reviews, BaselineMethod::Bm25) == reviews[1]);
        CHECK(baseline_answer(q, reviews, BaselineMethod::Tfidf) == reviews[1]);
    }

    SECTION("no reviews -> error") {
        CHECK_THROWS_AS(baseline_answer(tokenize("q"), {}, BaselineMethod::Bm25), DataError);
    }
}

TEST_CASE("index persistence round-trips scores") {
    std::vector<std::vector<std::string>> docs = {
        tokenize("the cup leaks water"), tokenize("great cup for tea"),
        tokenize("water stays hot for hours"),
    };
    auto idx = LexicalIndex::build(docs);
    auto path = std::filesystem::temp_directory_path() / "mpag_test_index.bin";
    idx.save(path.string());
    auto loaded = LexicalIndex::load(path.string());

    CHECK(loaded.size() == idx.size());
    CHECK(loaded.avg_len() == idx.avg_len());
    auto q = tokenize("hot water cup");
    for (std::size_t i = 0; i < docs.size(); ++i) {
        CHECK(loaded.bm25_score(q, i) == idx.bm25_score(q, i));
        CHECK(loaded.tfidf_cosine(q, i) == idx.tfidf_cosine(q, i));
    }
    std::filesystem::remove(path);

    CHECK_THROWS_AS(LexicalIndex::load("/nonexistent/idx.bin"), IoError);
}

TEST_CASE("index build leaves earlier documents' statistics unchanged") {
    std::vector<std::vector<std::string>> docs = {tokenize("a b a"), tokenize("b c")};
    auto idx1 = LexicalIndex::build(docs);
    docs.push_back(tokenize("a d"));
    auto idx2 = LexicalIndex::build(docs);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(idx1.term_count(i, "a") == idx2.term_count(i, "a"));
        CHECK(idx1.term_count(i, "b") == idx2.term_count(i, "b"));
        CHECK(idx1.doc_len(i) == idx2.doc_len(i));
    }
}
