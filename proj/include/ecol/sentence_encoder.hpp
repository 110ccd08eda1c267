#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace ecol {

using Vec = Eigen::VectorXd;

// Cosine with the zero-vector case defined as 0 (neutral relatedness).
double cosine_similarity(const Vec& a, const Vec& b);

// Lowercased alphanumeric runs; the shared word splitter for hashing and
// lexical indexing.
std::vector<std::string> lexical_words(const std::string& text);

struct SentenceEncoderConfig {
    int dim = 256;
    uint64_t seed = 0x5e17e9ce5ULL;
};

// Frozen sentence-level embedding used only for retrieval ranking: signed
// feature hashing of unigrams and bigrams with sublinear term weighting,
// L2-normalized. Deterministic for a given config; never trained.
class SentenceHashEncoder {
public:
    explicit SentenceHashEncoder(SentenceEncoderConfig config = {});

    Vec encode(const std::string& text) const;

    int dim() const { return config_.dim; }
    const SentenceEncoderConfig& config() const { return config_; }

private:
    SentenceEncoderConfig config_;
};

} // namespace ecol
