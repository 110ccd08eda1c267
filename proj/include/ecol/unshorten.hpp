#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ecol {

// Minimal http/https URL split; enough for redirect following and domain
// extraction (credentials and fragments are tolerated, not interpreted).
struct ParsedUrl {
    std::string scheme; // lowercase
    std::string host;   // lowercase, no brackets stripped for v6
    int port = 0;       // 0 = scheme default
    std::string target; // path + query, always starts with '/'

    std::string origin() const; // scheme://host[:port]
    std::string str() const;
};

std::optional<ParsedUrl> parse_http_url(const std::string& url);

enum class ResolveStatus { Resolved, Unresolved, LoopError, NetworkError };

std::string resolve_status_to_string(ResolveStatus status);
ResolveStatus resolve_status_from_string(const std::string& s);

struct Resolution {
    std::string original_url;
    std::string final_url; // equals original_url unless Resolved
    ResolveStatus status = ResolveStatus::Unresolved;
};

struct UnshortenerConfig {
    bool offline = true;
    int max_hops = 10;
    double timeout_seconds = 5.0;
    double politeness_delay_seconds = 0.0; // minimum spacing between hits per host
    int max_in_flight = 4;                 // concurrent request cap
    std::filesystem::path cache_file;      // empty = in-memory only
    std::string user_agent = "ecol-unshortener/1.0";
};

// Redirect-chain resolver with a persistent JSON-lines cache. Offline mode
// (the default) answers from the cache only; online mode follows up to
// max_hops redirects and records successful and looping resolutions.
class Unshortener {
public:
    explicit Unshortener(UnshortenerConfig config);

    // Cache-first resolution of one URL. Thread-safe.
    Resolution resolve(const std::string& url);

    // Resolves a batch; online lookups run concurrently under the in-flight
    // cap and per-host politeness delay. Result order matches input order.
    std::vector<Resolution> resolve_all(const std::vector<std::string>& urls);

    // Rewrites the cache file (sorted by URL) when one is configured.
    void flush();

    size_t cache_size() const;
    const UnshortenerConfig& config() const { return config_; }

private:
    Resolution resolve_online(const std::string& url);
    void politeness_wait(const std::string& host);

    UnshortenerConfig config_;
    mutable std::mutex mutex_;
    std::condition_variable slot_free_;
    int in_flight_ = 0;
    std::map<std::string, Resolution> cache_; // ordered for deterministic flush
    std::map<std::string, std::chrono::steady_clock::time_point> last_hit_;
    bool dirty_ = false;
};

} // namespace ecol
