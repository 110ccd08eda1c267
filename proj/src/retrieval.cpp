#include "ecol/retrieval.hpp"

#include "ecol/encoder.hpp"
#include "ecol/errors.hpp"
#include "ecol/hash.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

namespace ecol {

namespace {

constexpr const char* kIndexFormat = "ecol-index-1";

std::unordered_map<std::string, int> term_counts(const std::string& title,
                                                 const std::string& article) {
    std::unordered_map<std::string, int> counts;
    for (const std::string& w : lexical_words(combine_document_text(title, article))) {
        ++counts[w];
    }
    return counts;
}

} // namespace

SearchIndex SearchIndex::build(const std::vector<FactCheckDoc>& corpus,
                               SentenceEncoderConfig encoder_config) {
    SearchIndex index;
    index.encoder_ = SentenceHashEncoder(encoder_config);

    std::unordered_set<std::string> seen;
    seen.reserve(corpus.size());
    for (const FactCheckDoc& doc : corpus) {
        if (!seen.insert(doc.doc_id).second) {
            throw DataError("duplicate document id in corpus: " + doc.doc_id);
        }
        if (doc.verdict != Label::Fake) continue;
        index.doc_ids_.push_back(doc.doc_id);
        index.docs_.push_back(RetrievedDoc{doc.title, doc.article});
        index.embeddings_.push_back(
            index.encoder_.encode(combine_document_text(doc.title, doc.article)));
    }
    index.rebuild_postings();
    index.built_ = true;
    return index;
}

void SearchIndex::rebuild_postings() {
    postings_.clear();
    for (size_t d = 0; d < docs_.size(); ++d) {
        for (const auto& [term, tf] : term_counts(docs_[d].title, docs_[d].article)) {
            postings_[term].push_back(Posting{static_cast<int>(d), tf});
        }
    }
    for (auto& [term, list] : postings_) {
        std::sort(list.begin(), list.end(),
                  [](const Posting& a, const Posting& b) { return a.doc < b.doc; });
    }
}

RetrievalResult SearchIndex::search(const std::string& query, int k) const {
    if (!built_) throw DataError("search index has not been built");
    if (k <= 0) throw DataError("search k must be positive");

    // Lexical pass: tf-idf overlap between query terms and document terms.
    const double n_docs = static_cast<double>(docs_.size());
    std::unordered_map<int, double> overlap;
    std::unordered_set<std::string> query_terms;
    for (const std::string& w : lexical_words(query)) query_terms.insert(w);
    for (const std::string& term : query_terms) {
        const auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double df = static_cast<double>(it->second.size());
        const double idf = std::log((1.0 + n_docs) / (1.0 + df)) + 1.0;
        for (const Posting& p : it->second) {
            overlap[p.doc] += idf * (1.0 + std::log(static_cast<double>(p.tf)));
        }
    }

    std::vector<std::pair<int, double>> candidates(overlap.begin(), overlap.end());
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (candidates.size() > static_cast<size_t>(kLexicalCandidates)) {
        candidates.resize(static_cast<size_t>(kLexicalCandidates));
    }

    // Semantic pass: cosine rerank of the candidates.
    const Vec q = encoder_.encode(query);
    std::vector<std::pair<int, double>> ranked;
    ranked.reserve(candidates.size());
    for (const auto& [doc, score] : candidates) {
        (void)score;
        ranked.emplace_back(doc, cosine_similarity(q, embeddings_[static_cast<size_t>(doc)]));
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > static_cast<size_t>(k)) ranked.resize(static_cast<size_t>(k));

    RetrievalResult result;
    for (const auto& [doc, score] : ranked) {
        result.docs.push_back(docs_[static_cast<size_t>(doc)]);
        result.scores.push_back(score);
    }
    while (result.docs.size() < static_cast<size_t>(k)) {
        result.docs.push_back(RetrievedDoc{});
        result.scores.push_back(0.0);
    }
    return result;
}

uint64_t SearchIndex::content_hash() const {
    uint64_t h = fnv1a64(kIndexFormat);
    for (size_t d = 0; d < docs_.size(); ++d) {
        h = fnv1a64(doc_ids_[d], h);
        h = fnv1a64("\x1f", 1, h);
        h = fnv1a64(docs_[d].title, h);
        h = fnv1a64("\x1f", 1, h);
        h = fnv1a64(docs_[d].article, h);
        h = fnv1a64("\x1e", 1, h);
        const Vec& e = embeddings_[d];
        h = fnv1a64(e.data(), static_cast<size_t>(e.size()) * sizeof(double), h);
    }
    return h;
}

void SearchIndex::save(const std::filesystem::path& dir) const {
    if (!built_) throw DataError("cannot save an unbuilt index");
    std::filesystem::create_directories(dir);

    {
        std::ofstream out(dir / "docs.jsonl");
        if (!out) throw DataError("cannot write " + (dir / "docs.jsonl").string());
        for (size_t d = 0; d < docs_.size(); ++d) {
            nlohmann::json j{{"doc_id", doc_ids_[d]},
                             {"title", docs_[d].title},
                             {"article", docs_[d].article}};
            out << j.dump() << '\n';
        }
    }
    {
        std::ofstream out(dir / "embeddings.bin", std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / "embeddings.bin").string());
        for (const Vec& e : embeddings_) {
            out.write(reinterpret_cast<const char*>(e.data()),
                      static_cast<std::streamsize>(static_cast<size_t>(e.size()) * sizeof(double)));
        }
    }
    {
        std::ofstream out(dir / "postings.jsonl");
        if (!out) throw DataError("cannot write " + (dir / "postings.jsonl").string());
        for (const auto& [term, list] : postings_) {
            nlohmann::json docs = nlohmann::json::array();
            for (const Posting& p : list) docs.push_back({p.doc, p.tf});
            out << nlohmann::json{{"term", term}, {"docs", docs}}.dump() << '\n';
        }
    }
    {
        nlohmann::json manifest{
            {"format", kIndexFormat},
            {"doc_count", docs_.size()},
            {"encoder", {{"dim", encoder_.config().dim}, {"seed", encoder_.config().seed}}},
            {"content_hash", hash_hex(content_hash())},
        };
        std::ofstream out(dir / "manifest.json");
        if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
        out << manifest.dump(2) << '\n';
    }
}

SearchIndex SearchIndex::load(const std::filesystem::path& dir) {
    std::ifstream manifest_in(dir / "manifest.json");
    if (!manifest_in) throw DataError("cannot open index manifest: " + (dir / "manifest.json").string());
    const nlohmann::json manifest = nlohmann::json::parse(manifest_in);
    if (manifest.at("format").get<std::string>() != kIndexFormat) {
        throw DataError("unsupported index format: " + manifest.at("format").get<std::string>());
    }

    SearchIndex index;
    SentenceEncoderConfig cfg;
    cfg.dim = manifest.at("encoder").at("dim").get<int>();
    cfg.seed = manifest.at("encoder").at("seed").get<uint64_t>();
    index.encoder_ = SentenceHashEncoder(cfg);

    {
        std::ifstream in(dir / "docs.jsonl");
        if (!in) throw DataError("cannot open " + (dir / "docs.jsonl").string());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const nlohmann::json j = nlohmann::json::parse(line);
            index.doc_ids_.push_back(j.at("doc_id").get<std::string>());
            index.docs_.push_back(RetrievedDoc{j.at("title").get<std::string>(),
                                               j.at("article").get<std::string>()});
        }
    }
    if (index.docs_.size() != manifest.at("doc_count").get<size_t>()) {
        throw DataError("index document count does not match manifest");
    }
    {
        std::ifstream in(dir / "embeddings.bin", std::ios::binary);
        if (!in) throw DataError("cannot open " + (dir / "embeddings.bin").string());
        for (size_t d = 0; d < index.docs_.size(); ++d) {
            Vec e(cfg.dim);
            in.read(reinterpret_cast<char*>(e.data()),
                    static_cast<std::streamsize>(static_cast<size_t>(cfg.dim) * sizeof(double)));
            if (static_cast<size_t>(in.gcount()) != static_cast<size_t>(cfg.dim) * sizeof(double)) {
                throw DataError("embedding matrix truncated");
            }
            index.embeddings_.push_back(std::move(e));
        }
    }
    index.rebuild_postings();

    const std::string expected = manifest.at("content_hash").get<std::string>();
    const std::string actual = hash_hex(index.content_hash());
    if (expected != actual) {
        throw DataError("index content hash mismatch: manifest " + expected + ", computed " + actual);
    }
    index.built_ = true;
    return index;
}

Vec prior_knowledge_vector(const RetrievalResult& result, const DocEncoder& encode_doc) {
    if (result.docs.size() != static_cast<size_t>(kRetrievalK)) {
        throw DataError("retrieval result must contain exactly 10 documents");
    }
    Vec sum;
    for (const RetrievedDoc& doc : result.docs) {
        const Vec e = encode_doc(doc.title, doc.article);
        if (sum.size() == 0) {
            sum = e;
        } else {
            sum += e;
        }
    }
    return sum / static_cast<double>(kRetrievalK);
}

double relatedness(const Vec& fn, const Vec& p) {
    return cosine_similarity(fn, p);
}

void relatedness_backward(const Vec& fn, const Vec& p, double dcos, Vec& dfn, Vec& dp) {
    const double nf = fn.norm();
    const double np = p.norm();
    if (nf == 0.0 || np == 0.0) return;
    const double inv = 1.0 / (nf * np);
    const double cos = fn.dot(p) * inv;
    dfn += dcos * (p * inv - cos * fn / (nf * nf));
    dp += dcos * (fn * inv - cos * p / (np * np));
}

} // namespace ecol
