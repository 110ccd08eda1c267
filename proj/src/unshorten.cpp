#include "ecol/unshorten.hpp"

#include "ecol/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <thread>

namespace ecol {

namespace {

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool is_redirect(int status) {
    return status == 301 || status == 302 || status == 303 || status == 307 || status == 308;
}

// Resolves a Location header value against the URL it was served from.
std::string resolve_location(const ParsedUrl& base, const std::string& location) {
    if (location.rfind("http://", 0) == 0 || location.rfind("https://", 0) == 0) {
        return location;
    }
    if (location.rfind("//", 0) == 0) return base.scheme + ":" + location;
    if (!location.empty() && location[0] == '/') return base.origin() + location;
    // Relative path: substitute the last segment of the base path.
    std::string dir = base.target;
    const size_t q = dir.find('?');
    if (q != std::string::npos) dir.resize(q);
    const size_t slash = dir.rfind('/');
    dir.resize(slash + 1);
    return base.origin() + dir + location;
}

} // namespace

std::string ParsedUrl::origin() const {
    std::string out = scheme + "://" + host;
    if (port != 0) out += ":" + std::to_string(port);
    return out;
}

std::string ParsedUrl::str() const {
    return origin() + target;
}

std::optional<ParsedUrl> parse_http_url(const std::string& url) {
    ParsedUrl p;
    size_t pos;
    if (lower(url.substr(0, 7)) == "http://") {
        p.scheme = "http";
        pos = 7;
    } else if (lower(url.substr(0, 8)) == "https://") {
        p.scheme = "https";
        pos = 8;
    } else {
        return std::nullopt;
    }

    const size_t path_start = url.find_first_of("/?#", pos);
    std::string authority = url.substr(pos, path_start == std::string::npos
                                                ? std::string::npos
                                                : path_start - pos);
    const size_t at = authority.rfind('@');
    if (at != std::string::npos) authority = authority.substr(at + 1);
    if (authority.empty()) return std::nullopt;

    if (authority[0] == '[') { // bracketed v6 literal
        const size_t close = authority.find(']');
        if (close == std::string::npos) return std::nullopt;
        p.host = lower(authority.substr(0, close + 1));
        if (close + 1 < authority.size() && authority[close + 1] == ':') {
            p.port = std::atoi(authority.c_str() + close + 2);
        }
    } else {
        const size_t colon = authority.find(':');
        if (colon != std::string::npos) {
            p.host = lower(authority.substr(0, colon));
            p.port = std::atoi(authority.c_str() + colon + 1);
        } else {
            p.host = lower(authority);
        }
    }
    if (p.host.empty()) return std::nullopt;

    if (path_start == std::string::npos) {
        p.target = "/";
    } else if (url[path_start] == '/') {
        p.target = url.substr(path_start);
    } else {
        p.target = "/" + url.substr(path_start); // bare "?q" or "#f" after host
    }
    return p;
}

std::string resolve_status_to_string(ResolveStatus status) {
    switch (status) {
        case ResolveStatus::Resolved: return "resolved";
        case ResolveStatus::Unresolved: return "unresolved";
        case ResolveStatus::LoopError: return "loop_error";
        case ResolveStatus::NetworkError: return "network_error";
    }
    return "unresolved";
}

ResolveStatus resolve_status_from_string(const std::string& s) {
    if (s == "resolved") return ResolveStatus::Resolved;
    if (s == "unresolved") return ResolveStatus::Unresolved;
    if (s == "loop_error") return ResolveStatus::LoopError;
    if (s == "network_error") return ResolveStatus::NetworkError;
    throw DataError("unknown resolution status: " + s);
}

Unshortener::Unshortener(UnshortenerConfig config) : config_(std::move(config)) {
    if (config_.cache_file.empty() || !std::filesystem::exists(config_.cache_file)) return;
    std::ifstream in(config_.cache_file);
    if (!in) throw DataError("cannot open unshorten cache: " + config_.cache_file.string());
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw DataError("malformed cache line " + std::to_string(line_no) + " in " +
                            config_.cache_file.string());
        }
        Resolution r;
        r.original_url = j.at("original_url").get<std::string>();
        r.final_url = j.at("final_url").get<std::string>();
        r.status = resolve_status_from_string(j.at("status").get<std::string>());
        cache_[r.original_url] = std::move(r);
    }
}

size_t Unshortener::cache_size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.size();
}

Resolution Unshortener::resolve(const std::string& url) {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto it = cache_.find(url);
        if (it != cache_.end()) return it->second;
    }
    if (config_.offline) {
        return Resolution{url, url, ResolveStatus::Unresolved};
    }

    {
        std::unique_lock<std::mutex> lock(mutex_);
        slot_free_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
        ++in_flight_;
    }
    Resolution result = resolve_online(url);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        --in_flight_;
        // Loop outcomes are as deterministic as successes; transient network
        // failures are not recorded so a later run can retry.
        if (result.status == ResolveStatus::Resolved || result.status == ResolveStatus::LoopError) {
            cache_[url] = result;
            dirty_ = true;
        }
    }
    slot_free_.notify_one();
    return result;
}

void Unshortener::politeness_wait(const std::string& host) {
    if (config_.politeness_delay_seconds <= 0.0) return;
    const auto delay = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(config_.politeness_delay_seconds));
    std::chrono::steady_clock::time_point wake{};
    {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto now = std::chrono::steady_clock::now();
        auto& slot = last_hit_[host];
        wake = std::max(now, slot + delay);
        slot = wake; // reserve the slot so concurrent callers queue up
    }
    std::this_thread::sleep_until(wake);
}

Resolution Unshortener::resolve_online(const std::string& url) {
    std::string current = url;
    for (int hop = 0; hop <= config_.max_hops; ++hop) {
        const auto parsed = parse_http_url(current);
        if (!parsed) return Resolution{url, url, ResolveStatus::NetworkError};

        politeness_wait(parsed->host);
        httplib::Client client(parsed->origin());
        client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        client.set_follow_location(false);
        const httplib::Headers headers = {{"User-Agent", config_.user_agent}};

        const httplib::Result res = client.Get(parsed->target, headers);
        if (!res) return Resolution{url, url, ResolveStatus::NetworkError};
        if (!is_redirect(res->status)) {
            return Resolution{url, current, ResolveStatus::Resolved};
        }
        const std::string location = res->get_header_value("Location");
        if (location.empty()) {
            return Resolution{url, current, ResolveStatus::Resolved};
        }
        current = resolve_location(*parsed, location);
    }
    // max_hops redirects followed and the chain still pointed onward.
    return Resolution{url, url, ResolveStatus::LoopError};
}

std::vector<Resolution> Unshortener::resolve_all(const std::vector<std::string>& urls) {
    std::vector<Resolution> out(urls.size());
    if (config_.offline || urls.size() <= 1) {
        for (size_t i = 0; i < urls.size(); ++i) out[i] = resolve(urls[i]);
        return out;
    }
    std::vector<std::thread> workers;
    workers.reserve(urls.size());
    for (size_t i = 0; i < urls.size(); ++i) {
        workers.emplace_back([this, &urls, &out, i] { out[i] = resolve(urls[i]); });
    }
    for (std::thread& t : workers) t.join();
    return out;
}

void Unshortener::flush() {
    std::lock_guard<std::mutex> lock(mutex_);
    if (config_.cache_file.empty() || !dirty_) return;
    if (config_.cache_file.has_parent_path()) {
        std::filesystem::create_directories(config_.cache_file.parent_path());
    }
    std::ofstream out(config_.cache_file, std::ios::trunc);
    if (!out) throw DataError("cannot write unshorten cache: " + config_.cache_file.string());
    for (const auto& [key, r] : cache_) {
        nlohmann::json j{{"original_url", r.original_url},
                         {"final_url", r.final_url},
                         {"status", resolve_status_to_string(r.status)}};
        out << j.dump() << '\n';
    }
    dirty_ = false;
}

} // namespace ecol
