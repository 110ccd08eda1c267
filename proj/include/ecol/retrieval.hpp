#pragma once

#include "ecol/preprocess.hpp"
#include "ecol/sentence_encoder.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ecol {

// Previously fact-checked news story. Only verdict=fake documents are
// indexed for prior-knowledge retrieval; real ones are ingested but skipped.
struct FactCheckDoc {
    std::string doc_id;
    std::string title;
    std::string article;
    Label verdict = Label::Unknown;
    std::string published_before; // ISO-8601 date, informational only
};

constexpr int kRetrievalK = 10;
constexpr int kLexicalCandidates = 50;

struct RetrievedDoc {
    std::string title;
    std::string article;

    bool placeholder() const { return title.empty() && article.empty(); }
};

// Always exactly kRetrievalK entries; real hits first (scores non-increasing),
// then ("","") placeholders with score 0.
struct RetrievalResult {
    std::vector<RetrievedDoc> docs;
    std::vector<double> scores;
};

// Lexical-filter + embedding-rerank search over fake fact-check documents.
// Candidates are the top-50 documents by tf-idf term overlap with the query;
// the final order is cosine similarity between the query embedding and the
// stored document embeddings. Deterministic for a given corpus.
class SearchIndex {
public:
    SearchIndex() = default; // unbuilt; search() rejects until build/load

    static SearchIndex build(const std::vector<FactCheckDoc>& corpus,
                             SentenceEncoderConfig encoder_config = {});

    void save(const std::filesystem::path& dir) const;
    static SearchIndex load(const std::filesystem::path& dir);

    RetrievalResult search(const std::string& query, int k = kRetrievalK) const;

    bool built() const { return built_; }
    size_t size() const { return docs_.size(); }
    const SentenceHashEncoder& encoder() const { return encoder_; }

private:
    struct Posting {
        int doc = 0;
        int tf = 0;
    };

    void rebuild_postings();
    uint64_t content_hash() const;

    bool built_ = false;
    SentenceHashEncoder encoder_;
    std::vector<std::string> doc_ids_;
    std::vector<RetrievedDoc> docs_;
    std::vector<Vec> embeddings_;
    std::map<std::string, std::vector<Posting>> postings_; // ordered for determinism
};

// Per-document content encoder hook; the training loop passes the current
// trainable encoder so gradients flow through the averaged vector.
using DocEncoder = std::function<Vec(const std::string& title, const std::string& article)>;

// Mean of the ten retrieved document encodings (placeholders contribute the
// empty-sequence encoding).
Vec prior_knowledge_vector(const RetrievalResult& result, const DocEncoder& encode_doc);

// Cosine between the averaged fake-news vector and the post content vector;
// zero vectors give 0.
double relatedness(const Vec& fn, const Vec& p);

// Accumulates d(relatedness)/d(fn) and d(relatedness)/d(p) scaled by the
// upstream gradient dcos. Zero vectors contribute nothing (flat region).
void relatedness_backward(const Vec& fn, const Vec& p, double dcos, Vec& dfn, Vec& dp);

} // namespace ecol
