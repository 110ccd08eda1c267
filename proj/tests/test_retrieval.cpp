#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ecol/encoder.hpp"
#include "ecol/errors.hpp"
#include "ecol/retrieval.hpp"
#include "ecol/rng.hpp"
#include "ecol/sentence_encoder.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

using ecol::cosine_similarity;
using ecol::FactCheckDoc;
using ecol::Label;
using ecol::RetrievalResult;
using ecol::SearchIndex;
using ecol::Vec;

namespace {

std::vector<FactCheckDoc> small_corpus() {
    return {
        {"d1", "miracle cure for virus found", "a herbal miracle cure for the virus was found in a garden", Label::Fake, "2019-06-01"},
        {"d2", "vaccine microchip tracking claim", "the claim that the vaccine contains a microchip for tracking is false", Label::Fake, "2019-07-04"},
        {"d3", "masks cause oxygen loss hoax", "the hoax that masks cause oxygen loss spread quickly", Label::Fake, "2019-03-15"},
        {"d4", "hospital praised for new wing", "the hospital opened a new wing for cardiac care", Label::Real, "2019-01-20"},
        {"d5", "bleach drink cures illness", "drinking bleach does not cure any illness and is dangerous", Label::Fake, "2019-11-30"},
    };
}

} // namespace

TEST_CASE("empty corpus builds a valid empty index") {
    const SearchIndex index = SearchIndex::build({});
    CHECK(index.size() == 0);
    const RetrievalResult r = index.search("any query at all");
    REQUIRE(r.docs.size() == 10);
    REQUIRE(r.scores.size() == 10);
    for (int i = 0; i < 10; ++i) {
        CHECK(r.docs[static_cast<size_t>(i)].placeholder());
        CHECK(r.scores[static_cast<size_t>(i)] == 0.0);
    }
}

TEST_CASE("only fake-verdict documents are indexed") {
    const SearchIndex index = SearchIndex::build(small_corpus());
    CHECK(index.size() == 4); // d4 is real
}

TEST_CASE("small corpus returns real hits then placeholders") {
    const SearchIndex index = SearchIndex::build(small_corpus());
    const RetrievalResult r = index.search("virus cure vaccine masks bleach hoax claim");
    REQUIRE(r.docs.size() == 10);
    int real_hits = 0;
    bool seen_placeholder = false;
    for (int i = 0; i < 10; ++i) {
        const auto& d = r.docs[static_cast<size_t>(i)];
        if (d.placeholder()) {
            seen_placeholder = true;
            CHECK(r.scores[static_cast<size_t>(i)] == 0.0);
        } else {
            CHECK_FALSE(seen_placeholder); // hits precede padding
            ++real_hits;
        }
    }
    CHECK(real_hits == 4);
    for (int i = 1; i < real_hits; ++i) {
        CHECK(r.scores[static_cast<size_t>(i)] <= r.scores[static_cast<size_t>(i - 1)]);
    }
}

TEST_CASE("querying an exact title ranks that document first") {
    const SearchIndex index = SearchIndex::build(small_corpus());
    for (const auto& doc : small_corpus()) {
        if (doc.verdict != Label::Fake) continue;
        const RetrievalResult r = index.search(doc.title);
        REQUIRE_FALSE(r.docs[0].placeholder());
        CHECK(r.docs[0].title == doc.title);
    }
}

TEST_CASE("duplicate document ids are rejected by name") {
    auto corpus = small_corpus();
    corpus.push_back(corpus.front());
    CHECK_THROWS_WITH_AS(SearchIndex::build(corpus),
                         doctest::Contains("d1"), ecol::DataError);
}

TEST_CASE("searching an unbuilt index fails") {
    const SearchIndex index;
    CHECK_THROWS_AS((void)index.search("query"), ecol::DataError);
}

TEST_CASE("results agree with exhaustive cosine ranking over matching documents") {
    // Independent oracle: with < 50 lexically matching documents the candidate
    // set is exactly "documents sharing at least one query term", so the
    // returned order must equal brute-force cosine over that set.
    ecol::Rng rng(2026);
    const std::vector<std::string> topics = {
        "virus", "vaccine", "mask", "cure", "hospital", "bleach", "microchip",
        "oxygen", "tracking", "herbal", "garden", "illness", "doctor", "study",
    };
    std::vector<FactCheckDoc> corpus;
    for (int d = 0; d < 45; ++d) { // < 50 so the lexical cut never applies
        std::string title, article;
        const int tn = 2 + static_cast<int>(rng.bounded(3));
        for (int i = 0; i < tn; ++i) {
            if (i) title += ' ';
            title += topics[static_cast<size_t>(rng.bounded(topics.size()))];
        }
        const int an = 4 + static_cast<int>(rng.bounded(8));
        for (int i = 0; i < an; ++i) {
            if (i) article += ' ';
            article += topics[static_cast<size_t>(rng.bounded(topics.size()))];
        }
        corpus.push_back({"doc" + std::to_string(d), title, article, Label::Fake, "2019-01-01"});
    }
    const SearchIndex index = SearchIndex::build(corpus);
    const ecol::SentenceHashEncoder enc;

    for (int q = 0; q < 20; ++q) {
        std::string query;
        const int qn = 1 + static_cast<int>(rng.bounded(4));
        for (int i = 0; i < qn; ++i) {
            if (i) query += ' ';
            query += topics[static_cast<size_t>(rng.bounded(topics.size()))];
        }

        // Oracle candidate set: any shared term between query and document.
        std::set<std::string> qterms;
        for (const auto& w : ecol::lexical_words(query)) qterms.insert(w);
        std::vector<std::pair<double, int>> oracle; // (-cos, idx) for stable sort
        for (size_t d = 0; d < corpus.size(); ++d) {
            bool matches = false;
            const std::string combined =
                ecol::combine_document_text(corpus[d].title, corpus[d].article);
            for (const auto& w : ecol::lexical_words(combined)) {
                if (qterms.count(w)) {
                    matches = true;
                    break;
                }
            }
            if (!matches) continue;
            const double cos = cosine_similarity(enc.encode(query), enc.encode(combined));
            oracle.emplace_back(-cos, static_cast<int>(d));
        }
        REQUIRE(oracle.size() < 50); // oracle only valid below the lexical cut
        std::sort(oracle.begin(), oracle.end());

        const RetrievalResult r = index.search(query);
        const size_t expect_hits = std::min<size_t>(oracle.size(), 10);
        for (size_t i = 0; i < expect_hits; ++i) {
            const auto& expected = corpus[static_cast<size_t>(oracle[i].second)];
            INFO("query: ", query, " rank ", i);
            CHECK(r.docs[i].title == expected.title);
            CHECK(r.docs[i].article == expected.article);
            CHECK(r.scores[i] == doctest::Approx(-oracle[i].first).epsilon(1e-12));
        }
        for (size_t i = expect_hits; i < 10; ++i) CHECK(r.docs[i].placeholder());
    }
}

TEST_CASE("lexical filter caps the candidate set before the cosine rerank") {
    // 60 docs contain the query term; the 5 with the highest term frequency
    // plus the first 45 one-occurrence docs survive the lexical cut. The
    // last doc is an exact copy of the query (cosine 1) but falls outside
    // the candidate set, so it must not appear.
    std::vector<FactCheckDoc> corpus;
    for (int d = 0; d < 5; ++d) {
        corpus.push_back({"hi" + std::to_string(d), "plague plague plague plague",
                          "plague outbreak plague", Label::Fake, "2019-01-01"});
    }
    for (int d = 0; d < 54; ++d) {
        corpus.push_back({"lo" + std::to_string(d), "plague note " + std::to_string(d),
                          "unrelated filler text entry", Label::Fake, "2019-01-01"});
    }
    corpus.push_back({"exact", "plague", "", Label::Fake, "2019-01-01"});
    const SearchIndex index = SearchIndex::build(corpus);

    const RetrievalResult r = index.search("plague");
    for (const auto& d : r.docs) {
        CHECK(d.title != "plague"); // the exact copy was cut lexically
    }
    REQUIRE_FALSE(r.docs[0].placeholder());
}

TEST_CASE("save and load round trip preserves results byte for byte") {
    const auto dir = std::filesystem::temp_directory_path() / "ecol_index_test";
    std::filesystem::remove_all(dir);
    const SearchIndex built = SearchIndex::build(small_corpus());
    built.save(dir);
    const SearchIndex loaded = SearchIndex::load(dir);
    CHECK(loaded.size() == built.size());

    const std::string query = "vaccine microchip hoax";
    const RetrievalResult a = built.search(query);
    const RetrievalResult b = loaded.search(query);
    for (int i = 0; i < 10; ++i) {
        CHECK(a.docs[static_cast<size_t>(i)].title == b.docs[static_cast<size_t>(i)].title);
        CHECK(a.scores[static_cast<size_t>(i)] == b.scores[static_cast<size_t>(i)]);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("rebuilding from the same corpus writes identical files") {
    const auto dir_a = std::filesystem::temp_directory_path() / "ecol_index_a";
    const auto dir_b = std::filesystem::temp_directory_path() / "ecol_index_b";
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
    SearchIndex::build(small_corpus()).save(dir_a);
    SearchIndex::build(small_corpus()).save(dir_b);
    for (const char* name : {"manifest.json", "docs.jsonl", "embeddings.bin", "postings.jsonl"}) {
        std::ifstream fa(dir_a / name, std::ios::binary);
        std::ifstream fb(dir_b / name, std::ios::binary);
        const std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        const std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        INFO("file: ", name);
        CHECK(sa == sb);
    }
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("tampered index files are rejected on load") {
    const auto dir = std::filesystem::temp_directory_path() / "ecol_index_tamper";
    std::filesystem::remove_all(dir);
    SearchIndex::build(small_corpus()).save(dir);
    {
        std::fstream f(dir / "embeddings.bin", std::ios::in | std::ios::out | std::ios::binary);
        const double poison = 0.123456;
        f.seekp(8);
        f.write(reinterpret_cast<const char*>(&poison), sizeof(poison));
    }
    CHECK_THROWS_AS((void)SearchIndex::load(dir), ecol::DataError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("prior knowledge vector averages the ten document encodings") {
    // Stub encoder keyed on title length: hand-computable mean.
    const auto stub = [](const std::string& title, const std::string&) {
        Vec v = Vec::Zero(4);
        v[0] = static_cast<double>(title.size());
        v[1] = 1.0;
        return v;
    };
    RetrievalResult r;
    for (int i = 0; i < 10; ++i) {
        r.docs.push_back({std::string(static_cast<size_t>(i), 'x'), ""});
        r.scores.push_back(0.5);
    }
    const Vec fn = ecol::prior_knowledge_vector(r, stub);
    CHECK(fn[0] == doctest::Approx(4.5)); // mean of 0..9
    CHECK(fn[1] == doctest::Approx(1.0));
    CHECK(fn[2] == 0.0);

    // Permuting the documents leaves the mean unchanged.
    std::reverse(r.docs.begin(), r.docs.end());
    const Vec fn2 = ecol::prior_knowledge_vector(r, stub);
    CHECK((fn - fn2).norm() == 0.0);
}

TEST_CASE("identical retrieved docs average to that doc's encoding") {
    const ecol::SentenceHashEncoder enc;
    const auto encode = [&](const std::string& t, const std::string& a) {
        return enc.encode(ecol::combine_document_text(t, a));
    };
    RetrievalResult r;
    for (int i = 0; i < 10; ++i) {
        r.docs.push_back({"same title", "same article"});
        r.scores.push_back(1.0);
    }
    const Vec fn = ecol::prior_knowledge_vector(r, encode);
    const Vec single = encode("same title", "same article");
    CHECK((fn - single).norm() < 1e-12);
}

TEST_CASE("all placeholders average to the empty-text encoding") {
    const ecol::SentenceHashEncoder enc;
    const auto encode = [&](const std::string& t, const std::string& a) {
        return enc.encode(ecol::combine_document_text(t, a));
    };
    RetrievalResult r;
    r.docs.resize(10);
    r.scores.assign(10, 0.0);
    const Vec fn = ecol::prior_knowledge_vector(r, encode);
    CHECK((fn - encode("", "")).norm() == 0.0);
}

TEST_CASE("wrong result length is rejected") {
    RetrievalResult r;
    r.docs.resize(7);
    const auto stub = [](const std::string&, const std::string&) { return Vec::Zero(3); };
    CHECK_THROWS_AS((void)ecol::prior_knowledge_vector(r, stub), ecol::DataError);
}

TEST_CASE("relatedness matches cosine and stays within bounds") {
    ecol::Rng rng(424242);
    for (int i = 0; i < 1000; ++i) {
        Vec a(16), b(16);
        for (int j = 0; j < 16; ++j) {
            a[j] = rng.gaussian();
            b[j] = rng.gaussian();
        }
        const double r = ecol::relatedness(a, b);
        CHECK(r >= -1.0);
        CHECK(r <= 1.0);
        // Scale invariance for positive scalings.
        const double alpha = 0.1 + rng.uniform() * 10.0;
        const double beta = 0.1 + rng.uniform() * 10.0;
        CHECK(ecol::relatedness(Vec(alpha * a), Vec(beta * b)) == doctest::Approx(r).epsilon(1e-9));
    }
    Vec v(3);
    v << 1.0, 2.0, 3.0;
    CHECK(ecol::relatedness(v, v) == doctest::Approx(1.0));
    CHECK(ecol::relatedness(v, Vec(-v)) == doctest::Approx(-1.0));
    Vec e1 = Vec::Zero(3), e2 = Vec::Zero(3);
    e1[0] = 1.0;
    e2[1] = 1.0;
    CHECK(ecol::relatedness(e1, e2) == 0.0);
    CHECK(ecol::relatedness(Vec(Vec::Zero(3)), v) == 0.0);
}
