#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ecol/errors.hpp"
#include "ecol/unshorten.hpp"

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>

using ecol::parse_http_url;
using ecol::Resolution;
using ecol::ResolveStatus;
using ecol::Unshortener;
using ecol::UnshortenerConfig;

namespace {

// Local redirect fixture: /a → /b → /c (200), /loop1 ⇄ /loop2, /rel →
// relative target, /tmp307 → /c via 307, /plain → 200.
class FixtureServer {
public:
    FixtureServer() {
        server_.Get("/a", [this](const httplib::Request&, httplib::Response& res) {
            res.status = 301;
            res.set_header("Location", base() + "/b");
        });
        server_.Get("/b", [this](const httplib::Request&, httplib::Response& res) {
            res.status = 302;
            res.set_header("Location", base() + "/c");
        });
        server_.Get("/c", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("landed", "text/plain");
        });
        server_.Get("/loop1", [this](const httplib::Request&, httplib::Response& res) {
            res.status = 302;
            res.set_header("Location", base() + "/loop2");
        });
        server_.Get("/loop2", [this](const httplib::Request&, httplib::Response& res) {
            res.status = 302;
            res.set_header("Location", base() + "/loop1");
        });
        server_.Get("/rel", [](const httplib::Request&, httplib::Response& res) {
            res.status = 303;
            res.set_header("Location", "/c"); // host-relative
        });
        server_.Get("/dir/page", [](const httplib::Request&, httplib::Response& res) {
            res.status = 302;
            res.set_header("Location", "sibling"); // path-relative
        });
        server_.Get("/dir/sibling", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("sibling landed", "text/plain");
        });
        server_.Get("/tmp307", [this](const httplib::Request&, httplib::Response& res) {
            res.status = 307;
            res.set_header("Location", base() + "/c");
        });
        server_.Get("/plain", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("no redirect here", "text/plain");
        });
        server_.Get("/ua", [this](const httplib::Request& req, httplib::Response& res) {
            seen_user_agent_ = req.get_header_value("User-Agent");
            res.set_content("ok", "text/plain");
        });

        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~FixtureServer() {
        server_.stop();
        thread_.join();
    }

    std::string base() const { return "http://127.0.0.1:" + std::to_string(port_); }
    std::string url(const std::string& path) const { return base() + path; }
    const std::string& seen_user_agent() const { return seen_user_agent_; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::string seen_user_agent_;
};

UnshortenerConfig online_config() {
    UnshortenerConfig cfg;
    cfg.offline = false;
    cfg.timeout_seconds = 5.0;
    return cfg;
}

} // namespace

TEST_CASE("http url parsing") {
    auto p = parse_http_url("https://user:pw@News.Example.org:8080/Path/x?q=1#frag");
    REQUIRE(p.has_value());
    CHECK(p->scheme == "https");
    CHECK(p->host == "news.example.org");
    CHECK(p->port == 8080);
    CHECK(p->target == "/Path/x?q=1#frag");
    CHECK(p->origin() == "https://news.example.org:8080");

    auto bare = parse_http_url("HTTP://T.co");
    REQUIRE(bare.has_value());
    CHECK(bare->host == "t.co");
    CHECK(bare->target == "/");

    CHECK_FALSE(parse_http_url("ftp://example.com/x").has_value());
    CHECK_FALSE(parse_http_url("not a url").has_value());
    CHECK_FALSE(parse_http_url("http://").has_value());
}

TEST_CASE("online resolution follows a redirect chain to the end") {
    FixtureServer server;
    Unshortener un(online_config());
    const Resolution r = un.resolve(server.url("/a"));
    CHECK(r.status == ResolveStatus::Resolved);
    CHECK(r.final_url == server.url("/c"));
    CHECK(r.original_url == server.url("/a"));
}

TEST_CASE("non-redirecting urls resolve to themselves") {
    FixtureServer server;
    Unshortener un(online_config());
    const Resolution r = un.resolve(server.url("/plain"));
    CHECK(r.status == ResolveStatus::Resolved);
    CHECK(r.final_url == server.url("/plain"));
}

TEST_CASE("redirect loops fail after the hop budget") {
    FixtureServer server;
    UnshortenerConfig cfg = online_config();
    cfg.max_hops = 10;
    Unshortener un(cfg);
    const Resolution r = un.resolve(server.url("/loop1"));
    CHECK(r.status == ResolveStatus::LoopError);
    CHECK(r.final_url == server.url("/loop1")); // original url carried through
}

TEST_CASE("host-relative and path-relative redirects are resolved") {
    FixtureServer server;
    Unshortener un(online_config());
    CHECK(un.resolve(server.url("/rel")).final_url == server.url("/c"));
    CHECK(un.resolve(server.url("/dir/page")).final_url == server.url("/dir/sibling"));
}

TEST_CASE("temporary redirect status codes are followed too") {
    FixtureServer server;
    Unshortener un(online_config());
    CHECK(un.resolve(server.url("/tmp307")).final_url == server.url("/c"));
}

TEST_CASE("the configured user agent is sent") {
    FixtureServer server;
    UnshortenerConfig cfg = online_config();
    Unshortener un(cfg);
    un.resolve(server.url("/ua"));
    CHECK(server.seen_user_agent() == "ecol-unshortener/1.0");
}

TEST_CASE("unreachable hosts give a network error carrying the original url") {
    UnshortenerConfig cfg = online_config();
    cfg.timeout_seconds = 0.5;
    Unshortener un(cfg);
    // Port 1 on localhost is refused immediately.
    const Resolution r = un.resolve("http://127.0.0.1:1/x");
    CHECK(r.status == ResolveStatus::NetworkError);
    CHECK(r.final_url == "http://127.0.0.1:1/x");
}

TEST_CASE("offline mode answers from the cache and marks misses unresolved") {
    const auto dir = std::filesystem::temp_directory_path() / "ecol_unshorten_cache";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const auto cache = dir / "cache.jsonl";
    {
        std::ofstream out(cache);
        out << R"({"original_url":"http://sho.rt/x","final_url":"https://real.example.com/story","status":"resolved"})"
            << '\n';
    }
    UnshortenerConfig cfg;
    cfg.offline = true;
    cfg.cache_file = cache;
    Unshortener un(cfg);
    CHECK(un.cache_size() == 1);

    const Resolution hit = un.resolve("http://sho.rt/x");
    CHECK(hit.status == ResolveStatus::Resolved);
    CHECK(hit.final_url == "https://real.example.com/story");

    const Resolution miss = un.resolve("http://sho.rt/unknown");
    CHECK(miss.status == ResolveStatus::Unresolved);
    CHECK(miss.final_url == "http://sho.rt/unknown");
    std::filesystem::remove_all(dir);
}

TEST_CASE("online results are cached, flushed and readable offline") {
    const auto dir = std::filesystem::temp_directory_path() / "ecol_unshorten_flush";
    std::filesystem::remove_all(dir);
    const auto cache = dir / "cache.jsonl";

    FixtureServer server;
    {
        UnshortenerConfig cfg = online_config();
        cfg.cache_file = cache;
        Unshortener un(cfg);
        un.resolve(server.url("/a"));
        un.resolve(server.url("/loop1"));
        un.flush();
    }
    UnshortenerConfig offline;
    offline.offline = true;
    offline.cache_file = cache;
    Unshortener un(offline);
    CHECK(un.cache_size() == 2);
    CHECK(un.resolve(server.url("/a")).final_url == server.url("/c"));
    CHECK(un.resolve(server.url("/loop1")).status == ResolveStatus::LoopError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("second resolve of the same url hits the cache, not the network") {
    FixtureServer server;
    Unshortener un(online_config());
    const Resolution first = un.resolve(server.url("/a"));
    CHECK(un.cache_size() == 1);
    const Resolution again = un.resolve(server.url("/a"));
    CHECK(again.final_url == first.final_url);
}

TEST_CASE("batch resolution keeps input order under concurrency") {
    FixtureServer server;
    UnshortenerConfig cfg = online_config();
    cfg.max_in_flight = 3;
    Unshortener un(cfg);
    const std::vector<std::string> urls = {
        server.url("/a"), server.url("/plain"), server.url("/tmp307"),
        server.url("/rel"), server.url("/b"),
    };
    const auto results = un.resolve_all(urls);
    REQUIRE(results.size() == urls.size());
    CHECK(results[0].final_url == server.url("/c"));
    CHECK(results[1].final_url == server.url("/plain"));
    CHECK(results[2].final_url == server.url("/c"));
    CHECK(results[3].final_url == server.url("/c"));
    CHECK(results[4].final_url == server.url("/c"));
    for (size_t i = 0; i < urls.size(); ++i) CHECK(results[i].original_url == urls[i]);
}

TEST_CASE("per-host politeness delay spaces out requests") {
    FixtureServer server;
    UnshortenerConfig cfg = online_config();
    cfg.politeness_delay_seconds = 0.15;
    Unshortener un(cfg);
    const auto start = std::chrono::steady_clock::now();
    un.resolve(server.url("/plain"));
    un.resolve(server.url("/c"));
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
    CHECK(elapsed.count() >= 0.15); // second hit waited for the host slot
}
