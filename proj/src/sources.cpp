#include "ecol/sources.hpp"

#include "ecol/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace ecol {

namespace {

// Compact public-suffix subset: the generic top-level domains plus the
// multi-label country suffixes common in news and shortener hosts. Longest
// match wins; unknown single-label suffixes fall back to the last label.
const std::unordered_set<std::string>& public_suffixes() {
    static const std::unordered_set<std::string> suffixes = {
        // multi-label country suffixes
        "co.uk", "org.uk", "ac.uk", "gov.uk", "net.uk", "me.uk", "ltd.uk", "plc.uk",
        "com.au", "net.au", "org.au", "edu.au", "gov.au",
        "co.nz", "net.nz", "org.nz",
        "co.in", "net.in", "org.in", "gov.in",
        "co.jp", "ne.jp", "or.jp", "ac.jp", "go.jp",
        "com.br", "net.br", "org.br", "gov.br",
        "co.za", "org.za", "gov.za",
        "com.cn", "net.cn", "org.cn", "gov.cn",
        "co.kr", "com.mx", "com.ar", "com.tr", "co.il", "com.sg", "com.hk",
        "com.tw", "co.th", "com.my", "co.id", "com.ph", "com.vn", "com.pk",
        "com.ua", "com.ng", "co.ke",
        // generic and country single labels
        "com", "org", "net", "edu", "gov", "mil", "int", "info", "biz", "io",
        "co", "me", "tv", "us", "uk", "au", "nz", "in", "jp", "br", "za",
        "ca", "de", "fr", "it", "es", "nl", "se", "no", "fi", "dk", "ch",
        "at", "be", "ie", "pl", "ru", "cn", "kr", "mx", "ar", "tr", "gr",
        "pt", "cz", "sk", "hu", "ro", "bg", "hr", "si", "lt", "lv", "ee",
        "ua", "il", "sg", "hk", "tw", "th", "my", "id", "ph", "vn", "pk",
        "eu", "ly", "gl", "gd", "to", "cc", "ws", "fm", "am", "is", "la",
        "sh", "ac", "st", "su", "ng", "ke",
        "xyz", "online", "site", "news", "app", "dev", "blog", "wiki",
        "press", "media", "live",
    };
    return suffixes;
}

bool is_ip_host(const std::string& host) {
    if (!host.empty() && host.front() == '[') return true; // v6 literal
    bool all_numeric_labels = true;
    std::string label;
    std::istringstream in(host);
    int labels = 0;
    while (std::getline(in, label, '.')) {
        ++labels;
        if (label.empty()) return false;
        for (char c : label) {
            if (!std::isdigit(static_cast<unsigned char>(c))) {
                all_numeric_labels = false;
            }
        }
    }
    return all_numeric_labels && labels == 4;
}

std::vector<std::string> split_labels(const std::string& host) {
    std::vector<std::string> labels;
    std::string label;
    std::istringstream in(host);
    while (std::getline(in, label, '.')) labels.push_back(label);
    return labels;
}

std::string ascii_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string first_paragraph(const std::string& text) {
    size_t begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    size_t end = text.find("\n\n", begin);
    if (end == std::string::npos) end = text.size();
    std::string para = text.substr(begin, end - begin);
    std::replace(para.begin(), para.end(), '\n', ' ');
    const size_t last = para.find_last_not_of(" \t\r");
    para.resize(last == std::string::npos ? 0 : last + 1);
    return para;
}

} // namespace

std::string tag_to_string(ReliabilityTag tag) {
    switch (tag) {
        case ReliabilityTag::Reliable: return "reliable";
        case ReliabilityTag::Unreliable: return "unreliable";
        case ReliabilityTag::Satire: return "satire";
        case ReliabilityTag::Na: return "na";
    }
    return "na";
}

ReliabilityTag tag_from_string(const std::string& s) {
    if (s == "reliable") return ReliabilityTag::Reliable;
    if (s == "unreliable") return ReliabilityTag::Unreliable;
    if (s == "satire") return ReliabilityTag::Satire;
    if (s == "na") return ReliabilityTag::Na;
    throw DataError("unknown reliability tag: " + s);
}

Vec one_hot(ReliabilityTag tag) {
    Vec v = Vec::Zero(kReliabilityDim);
    v[static_cast<int>(tag)] = 1.0;
    return v;
}

std::optional<std::string> extract_domain(const std::string& url) {
    const auto parsed = parse_http_url(url);
    if (!parsed) return std::nullopt;
    std::string host = parsed->host; // already lowercase
    if (host == "localhost" || is_ip_host(host)) return std::nullopt;

    std::vector<std::string> labels = split_labels(host);
    if (!labels.empty() && labels.front() == "www") labels.erase(labels.begin());
    if (labels.size() < 2) return std::nullopt; // bare suffix or single label

    // Longest public suffix made of trailing labels; a host that IS a
    // public suffix has no registrable label.
    size_t suffix_len = 1; // fallback: last label acts as the suffix
    for (size_t take = labels.size(); take >= 1; --take) {
        std::string candidate;
        for (size_t i = labels.size() - take; i < labels.size(); ++i) {
            if (!candidate.empty()) candidate += '.';
            candidate += labels[i];
        }
        if (public_suffixes().count(candidate)) {
            suffix_len = take;
            break;
        }
    }
    if (labels.size() <= suffix_len) return std::nullopt;
    return labels[labels.size() - suffix_len - 1];
}

ReliabilityMap ReliabilityMap::from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open reliability file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty reliability file: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "domain,tag") {
        throw DataError("reliability file must start with header domain,tag: " + path.string());
    }
    ReliabilityMap map;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw DataError("reliability line " + std::to_string(line_no) + " has no tag column");
        }
        const std::string domain = ascii_lower(line.substr(0, comma));
        const ReliabilityTag tag = tag_from_string(line.substr(comma + 1));
        if (tag == ReliabilityTag::Na) {
            throw DataError("reliability line " + std::to_string(line_no) +
                            ": na is implied by absence, not stored");
        }
        const auto it = map.entries_.find(domain);
        if (it != map.entries_.end() && it->second != tag) {
            throw DataError("conflicting reliability tags for domain " + domain);
        }
        map.entries_[domain] = tag;
    }
    return map;
}

ReliabilityMap ReliabilityMap::aggregate_assessments(const RawAssessments& raw) {
    ReliabilityMap map;
    for (const std::string& d : raw.high_factual) {
        map.entries_[ascii_lower(d)] = ReliabilityTag::Reliable;
    }
    for (const std::string& d : raw.low_factual) {
        map.entries_[ascii_lower(d)] = ReliabilityTag::Unreliable;
    }
    for (const std::string& d : raw.conspiracy_pseudoscience) {
        map.entries_[ascii_lower(d)] = ReliabilityTag::Unreliable;
    }
    for (const std::string& d : raw.satire) {
        map.entries_[ascii_lower(d)] = ReliabilityTag::Satire;
    }
    return map;
}

void ReliabilityMap::insert(const std::string& domain, ReliabilityTag tag) {
    if (tag == ReliabilityTag::Na) {
        throw DataError("na is implied by absence, not stored");
    }
    entries_[ascii_lower(domain)] = tag;
}

ReliabilityTag ReliabilityMap::tag(const std::string& domain) const {
    const auto it = entries_.find(domain);
    return it == entries_.end() ? ReliabilityTag::Na : it->second;
}

DescriptionMap DescriptionMap::build(const std::filesystem::path& path, size_t* skipped) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open description file: " + path.string());
    std::unordered_map<std::string, std::string> first_page;
    std::unordered_set<std::string> ambiguous;
    size_t bad_lines = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::string title, text;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            title = j.at("title").get<std::string>();
            text = j.at("text").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            ++bad_lines;
            continue;
        }
        const std::string key = ascii_lower(title);
        if (ambiguous.count(key)) continue;
        const auto [it, inserted] = first_page.emplace(key, first_paragraph(text));
        if (!inserted) {
            // Same title on a second page: the entity is ambiguous.
            first_page.erase(it);
            ambiguous.insert(key);
        }
    }
    if (skipped) *skipped = bad_lines;
    DescriptionMap map;
    map.entries_ = std::move(first_page);
    return map;
}

void DescriptionMap::insert(const std::string& title, const std::string& para) {
    entries_[ascii_lower(title)] = para;
}

std::string DescriptionMap::description(const std::string& domain) const {
    const auto it = entries_.find(domain);
    return it == entries_.end() ? "" : it->second;
}

Vec source_feature(const PreprocessedPost& post, Unshortener& unshortener,
                   const ReliabilityMap& reliability, const DescriptionMap& descriptions,
                   const TextEncoder& encode_text, const SourceFeatureConfig& config) {
    Vec s = Vec::Zero(kSourceFeatureDim);
    const size_t n = std::min(post.urls.size(), static_cast<size_t>(kSourceSlots));
    for (size_t slot = 0; slot < n; ++slot) {
        const Resolution res = unshortener.resolve(post.urls[slot]);
        ReliabilityTag tag = ReliabilityTag::Na;
        std::string desc;
        const bool failed = res.status == ResolveStatus::LoopError ||
                            res.status == ResolveStatus::NetworkError;
        if (!failed) {
            const std::string& effective =
                res.status == ResolveStatus::Resolved ? res.final_url : res.original_url;
            if (const auto domain = extract_domain(effective)) {
                tag = reliability.tag(*domain);
                desc = descriptions.description(*domain);
            }
        }
        const Eigen::Index base = static_cast<Eigen::Index>(slot) * kSlotDim;
        s.segment(base, kReliabilityDim) = one_hot(tag);
        if (!desc.empty() || config.encode_missing_description) {
            const Vec emb = encode_text(desc);
            if (emb.size() != kSlotDim - kReliabilityDim) {
                throw DataError("description embedding must have dimension 768");
            }
            s.segment(base + kReliabilityDim, emb.size()) = emb;
        }
    }
    return s;
}

} // namespace ecol
