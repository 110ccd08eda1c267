#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ecol/preprocess.hpp"
#include "ecol/rng.hpp"

#include <regex>
#include <string>
#include <vector>

using ecol::extract_urls;
using ecol::normalize_text;

TEST_CASE("lowercases and keeps punctuation") {
    CHECK(normalize_text("Visit http://bit.ly/abc NOW!!") == "visit <URL> now!!");
    CHECK(normalize_text("Hello, World.") == "hello, world.");
}

TEST_CASE("emails and phone numbers are tagged") {
    CHECK(normalize_text("Contact a@b.com or 555-123-4567") == "contact <EMAIL> or <PHONE>");
    CHECK(normalize_text("call (555) 123-4567 today") == "call <PHONE> today");
    CHECK(normalize_text("intl +44 20 7946 0958") == "intl <PHONE>");
}

TEST_CASE("accented characters transliterate to ASCII") {
    CHECK(normalize_text("café naïve") == "cafe naive");
    CHECK(normalize_text("Zürich España œuvre") == "zurich espana oeuvre");
    CHECK(normalize_text("“smart quotes” — dash…") == "\"smart quotes\" - dash...");
}

TEST_CASE("currency and magnitudes are tagged separately") {
    CHECK(normalize_text("Price rose to $5") == "price rose to <CUR><NUMBER>");
    // "3.50" is one decimal token, not two magnitudes.
    CHECK(normalize_text("worth €200 or £3.50") == "worth <CUR><NUMBER> or <CUR><NUMBER>");
}

TEST_CASE("standalone single digits become <DIGIT>, everything else <NUMBER>") {
    CHECK(normalize_text("gave it 5 stars") == "gave it <DIGIT> stars");
    CHECK(normalize_text("gave it 55 stars") == "gave it <NUMBER> stars");
    CHECK(normalize_text("covid19 cases") == "covid<NUMBER> cases");
    CHECK(normalize_text("7") == "<DIGIT>");
    CHECK(normalize_text("2020-12-25") == "<NUMBER>-<NUMBER>-<NUMBER>");
}

TEST_CASE("existing tags survive renormalization") {
    CHECK(normalize_text("saw <URL> and <CUR><NUMBER>") == "saw <URL> and <CUR><NUMBER>");
}

TEST_CASE("mojibake is repaired before transliteration") {
    // "café" UTF-8 bytes misread as latin-1 produce "cafÃ©"; repair must fold
    // it back before the accent is stripped.
    CHECK(normalize_text("caf\xc3\x83\xc2\xa9") == "cafe");
}

TEST_CASE("raw latin-1 bytes fall back gracefully") {
    CHECK(normalize_text("caf\xe9") == "cafe"); // invalid UTF-8, valid latin-1
}

TEST_CASE("empty input yields empty output") {
    CHECK(normalize_text("").empty());
}

TEST_CASE("urls with trailing punctuation are trimmed") {
    CHECK(normalize_text("see https://example.com/a_b(c)d, ok") == "see <URL>, ok");
    const auto urls = extract_urls("see https://example.com/a_b(c)d, ok");
    REQUIRE(urls.size() == 1);
    CHECK(urls[0] == "https://example.com/a_b(c)d");
}

TEST_CASE("extract_urls keeps order, case and duplicates") {
    const std::string raw =
        "first HTTP://T.co/AbC then https://news.example.org/x?id=9 and again HTTP://T.co/AbC";
    const auto urls = extract_urls(raw);
    REQUIRE(urls.size() == 3);
    CHECK(urls[0] == "HTTP://T.co/AbC");
    CHECK(urls[1] == "https://news.example.org/x?id=9");
    CHECK(urls[2] == "HTTP://T.co/AbC");
}

TEST_CASE("extract_urls ignores case changes outside urls") {
    const std::string a = "Read This https://t.co/xyz Today";
    const std::string b = "rEAD tHIS https://t.co/xyz tODAY";
    CHECK(extract_urls(a) == extract_urls(b));
}

TEST_CASE("extract_urls finds nothing in plain text") {
    CHECK(extract_urls("no links here, just words").empty());
    CHECK(extract_urls("").empty());
}

TEST_CASE("preprocess bundles id, normalized text and urls") {
    ecol::Post post{"p1", "BREAKING: vaccine hoax at https://t.co/Q1w2 spread by bots",
                    ecol::Label::Fake, ecol::SplitSource::Train};
    const auto pre = ecol::preprocess(post);
    CHECK(pre.post_id == "p1");
    CHECK(pre.normalized_text == "breaking: vaccine hoax at <URL> spread by bots");
    REQUIRE(pre.urls.size() == 1);
    CHECK(pre.urls[0] == "https://t.co/Q1w2");
}

namespace {

// Random mixed-content corpus: ASCII, accents, multibyte junk, digits, urls.
std::string random_text(ecol::Rng& rng) {
    static const std::vector<std::string> pieces = {
        "word", "données", "años", "Ünïtë", "…", "“q”", "#tag", "@user", "5", "42", "3.14",
        "http://bit.ly/x9", "https://example.com/Path?a=1", "a@b.org", "555-123-4567",
        "$9", "€77", "\xe9\xa0", "\xf0\x9f\x98\x80", "covid19", "<URL>", "<NUMBER>", "!!", "--",
    };
    std::string out;
    const int n = 1 + static_cast<int>(rng.bounded(12));
    for (int i = 0; i < n; ++i) {
        if (i) out += rng.bounded(8) == 0 ? "  " : " ";
        out += pieces[static_cast<size_t>(rng.bounded(pieces.size()))];
    }
    return out;
}

} // namespace

TEST_CASE("normalization is idempotent on a fuzz corpus") {
    ecol::Rng rng(20260815);
    for (int i = 0; i < 500; ++i) {
        const std::string raw = random_text(rng);
        const std::string once = normalize_text(raw);
        const std::string twice = normalize_text(once);
        INFO("raw: ", raw);
        CHECK(once == twice);
    }
}

TEST_CASE("no raw urls, emails, phones or digits survive normalization") {
    ecol::Rng rng(77);
    const std::regex url_re("https?://", std::regex::icase);
    const std::regex email_re("[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+");
    const std::regex digit_re("[0-9]");
    for (int i = 0; i < 500; ++i) {
        const std::string out = normalize_text(random_text(rng));
        INFO("normalized: ", out);
        CHECK_FALSE(std::regex_search(out, url_re));
        CHECK_FALSE(std::regex_search(out, email_re));
        CHECK_FALSE(std::regex_search(out, digit_re));
    }
}

TEST_CASE("normalized output is pure ASCII and lowercase") {
    ecol::Rng rng(99);
    for (int i = 0; i < 500; ++i) {
        const std::string out = normalize_text(random_text(rng));
        for (unsigned char c : out) {
            CHECK(c < 0x80);
            if (c >= 'A' && c <= 'Z') {
                // Uppercase appears only inside substitution tags.
                static const std::string tag_chars = "URLEMAILNUMBERDIGITPHONECS";
                CHECK(tag_chars.find(static_cast<char>(c)) != std::string::npos);
            }
        }
    }
}

TEST_CASE("label round trip") {
    CHECK(ecol::label_to_string(ecol::Label::Fake) == "fake");
    CHECK(ecol::label_to_string(ecol::Label::Real) == "real");
    CHECK(ecol::label_from_string("fake") == ecol::Label::Fake);
    CHECK(ecol::label_from_string("real") == ecol::Label::Real);
}
