#include "ecol/sentence_encoder.hpp"

#include <cctype>
#include <cmath>
#include <unordered_map>
#include <vector>

namespace ecol {

double cosine_similarity(const Vec& a, const Vec& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

namespace {

uint64_t fnv1a64(const std::string& s, uint64_t seed) {
    uint64_t h = 1469598103934665603ULL ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

std::vector<std::string> lexical_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

SentenceHashEncoder::SentenceHashEncoder(SentenceEncoderConfig config) : config_(config) {}

Vec SentenceHashEncoder::encode(const std::string& text) const {
    const std::vector<std::string> words = lexical_words(text);

    std::unordered_map<std::string, int> counts;
    counts.reserve(words.size() * 2);
    for (size_t i = 0; i < words.size(); ++i) {
        ++counts[words[i]];
        if (i + 1 < words.size()) ++counts[words[i] + " " + words[i + 1]];
    }

    Vec v = Vec::Zero(config_.dim);
    for (const auto& [feature, count] : counts) {
        const uint64_t h = fnv1a64(feature, config_.seed);
        const auto idx = static_cast<Eigen::Index>(h % static_cast<uint64_t>(config_.dim));
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v[idx] += sign * (1.0 + std::log(static_cast<double>(count)));
    }
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
    return v;
}

} // namespace ecol
