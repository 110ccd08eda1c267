#pragma once

#include "ecol/preprocess.hpp"
#include "ecol/sentence_encoder.hpp"
#include "ecol/unshorten.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ecol {

enum class ReliabilityTag { Reliable, Unreliable, Satire, Na };

std::string tag_to_string(ReliabilityTag tag);
ReliabilityTag tag_from_string(const std::string& s);

// Fixed coordinate order: (reliable, unreliable, satire, na).
Vec one_hot(ReliabilityTag tag);

// Registrable-domain label of a URL: scheme/credentials/port/path stripped,
// "www." removed, public-suffix rules applied, only the label left of the
// suffix kept ("https://news.bbc.co.uk/a" → "bbc"). IP-address and localhost
// hosts have no source name and yield nullopt.
std::optional<std::string> extract_domain(const std::string& url);

// domain token → reliability tag; absent domains are Na.
class ReliabilityMap {
public:
    // CSV with header "domain,tag"; values reliable/unreliable/satire.
    static ReliabilityMap from_csv(const std::filesystem::path& path);

    // Aggregation of raw assessment lists: high factual reporting → reliable,
    // low factual or conspiracy/pseudoscience → unreliable, satire registry →
    // satire. Later rules override earlier ones for conflicting domains.
    struct RawAssessments {
        std::vector<std::string> high_factual;
        std::vector<std::string> low_factual;
        std::vector<std::string> conspiracy_pseudoscience;
        std::vector<std::string> satire;
    };
    static ReliabilityMap aggregate_assessments(const RawAssessments& raw);

    void insert(const std::string& domain, ReliabilityTag tag);
    ReliabilityTag tag(const std::string& domain) const;
    size_t size() const { return entries_.size(); }

private:
    std::unordered_map<std::string, ReliabilityTag> entries_;
};

// Lowercase entity title → first paragraph of its encyclopedia page.
// Titles appearing on more than one page are ambiguous and dropped entirely.
class DescriptionMap {
public:
    // JSON-lines with keys title, text. Malformed lines are skipped and
    // counted.
    static DescriptionMap build(const std::filesystem::path& path, size_t* skipped = nullptr);

    void insert(const std::string& title, const std::string& first_paragraph);
    std::string description(const std::string& domain) const; // miss → ""
    size_t size() const { return entries_.size(); }
    const std::unordered_map<std::string, std::string>& entries() const { return entries_; }

private:
    std::unordered_map<std::string, std::string> entries_;
};

constexpr int kReliabilityDim = 4;
constexpr int kSourceSlots = 5;
constexpr int kSlotDim = kReliabilityDim + 768;
constexpr int kSourceFeatureDim = kSourceSlots * kSlotDim; // 3860

struct SourceFeatureConfig {
    // Missing descriptions default to a zero block; the alternative encodes
    // the empty string through the text encoder instead.
    bool encode_missing_description = false;
};

// Embeds one description text into 768 dimensions (frozen, non-trainable).
using TextEncoder = std::function<Vec(const std::string& text)>;

// Builds the 3860-dim source block: for the first five URLs in textual
// order, [one_hot(tag) ‖ description embedding]; remaining slots stay zero.
// Per-URL resolution failures degrade that slot to na with a zero
// description; they never abort the post.
Vec source_feature(const PreprocessedPost& post, Unshortener& unshortener,
                   const ReliabilityMap& reliability, const DescriptionMap& descriptions,
                   const TextEncoder& encode_text, const SourceFeatureConfig& config = {});

} // namespace ecol
