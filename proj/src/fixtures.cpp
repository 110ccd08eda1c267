#include "ecol/fixtures.hpp"

#include "ecol/errors.hpp"
#include "ecol/pipeline.hpp"
#include "ecol/rng.hpp"

#include <json.hpp>

#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace ecol {
namespace {

// Class-discriminative vocabulary. The pools are disjoint so the difficulty
// of the synthetic task is controlled entirely by kFlipRate below.
const std::vector<std::string>& fake_pool() {
    static const std::vector<std::string> words = {
        "miracle",   "cure",      "secret",    "exposed",   "hoax",     "shocking",
        "banned",    "remedy",    "detox",     "toxin",     "conspiracy", "coverup",
        "bleach",    "garlic",    "colloidal", "silver",    "microchip", "implant",
        "suppressed", "leaked",   "insider",   "whistleblower", "forbidden", "ancient",
        "herbal",    "overnight", "instantly", "elites",    "hiding",   "awakened",
        "sheeple",   "plandemic", "fearmongering", "cabal", "censored", "bombshell",
    };
    return words;
}

const std::vector<std::string>& real_pool() {
    static const std::vector<std::string> words = {
        "ministry",  "health",       "official",   "confirms",   "vaccination", "schedule",
        "guidance",  "update",       "advisory",   "bulletin",   "statistics",  "surveillance",
        "immunization", "clinic",    "rollout",    "booster",    "eligibility", "quarantine",
        "protocol",  "epidemiologist", "reviewed", "journal",    "dataset",     "briefing",
        "spokesperson", "announced", "regional",   "hospitals",  "capacity",    "screening",
        "monitoring", "committee",   "published",  "guidelines", "testing",     "distancing",
    };
    return words;
}

const std::vector<std::string>& filler_pool() {
    static const std::vector<std::string> words = {
        "the",   "and",  "for",    "with",  "today",  "people", "after", "about",
        "amid",  "over", "during", "against", "more", "than",   "this",  "that",
        "will",  "have", "been",   "says",  "new",    "report", "cases", "week",
        "rise",  "drop", "total",  "latest", "city",  "nation",
    };
    return words;
}

const std::vector<std::string>& reliable_domains() {
    static const std::vector<std::string> d = {
        "healthagency.gov", "worldhealthdesk.org", "civicfactcheck.org",
        "metrodailynews.com", "sciencebulletin.net",
    };
    return d;
}

const std::vector<std::string>& unreliable_domains() {
    static const std::vector<std::string> d = {
        "hoaxnews.com", "viralcurereport.com", "truthunveiled.net",
        "shadowhealthwire.com", "dailyclickbait.info",
    };
    return d;
}

constexpr const char* kSatireDomain = "dailymockery.com";

std::string short_code(char prefix, int i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%c%02d", prefix, i);
    return buf;
}

// Short links with a cached resolution: g* land on reliable hosts, h* on
// unreliable ones, m* alternate. u* are deliberately absent from the cache so
// offline runs exercise the unresolved path.
std::vector<std::pair<std::string, std::string>> cached_short_links() {
    std::vector<std::pair<std::string, std::string>> out;
    for (int i = 1; i <= 12; ++i) {
        const std::string code = short_code('g', i);
        out.emplace_back("https://bit.ly/" + code,
                         "https://" + reliable_domains()[i % 5] + "/redirect/" + code);
    }
    for (int i = 1; i <= 12; ++i) {
        const std::string code = short_code('h', i);
        out.emplace_back("https://bit.ly/" + code,
                         "https://" + unreliable_domains()[i % 5] + "/redirect/" + code);
    }
    for (int i = 1; i <= 6; ++i) {
        const std::string code = short_code('m', i);
        const std::string host = (i % 2 == 0) ? reliable_domains()[i % 5]
                                              : unreliable_domains()[i % 5];
        out.emplace_back("https://tinyurl.com/" + code, "https://" + host + "/redirect/" + code);
    }
    return out;
}

// Fraction of posts whose class-discriminative words are drawn from the
// opposite pool. Calibrated so the lexical baselines score in the low
// nineties on the synthetic dev and test splits.
constexpr double kFlipRate = 0.061;

std::string pick(Rng& rng, const std::vector<std::string>& pool) {
    return pool[rng.bounded(pool.size())];
}

std::string make_url(Rng& rng, Label label) {
    const double roll = rng.uniform();
    if (roll < 0.12) { // short link, mostly class-consistent
        const bool cross = rng.uniform() < 0.2;
        const bool to_reliable = (label == Label::Real) != cross;
        const char prefix = to_reliable ? 'g' : 'h';
        return "https://bit.ly/" + short_code(prefix, 1 + static_cast<int>(rng.bounded(12)));
    }
    if (roll < 0.17) return "https://tinyurl.com/" + short_code('m', 1 + static_cast<int>(rng.bounded(6)));
    if (roll < 0.20) return "https://bit.ly/" + short_code('u', 1 + static_cast<int>(rng.bounded(2)));
    if (roll < 0.25 && label == Label::Fake) {
        return std::string("https://") + kSatireDomain + "/" + pick(rng, fake_pool());
    }
    const bool cross = rng.uniform() < 0.15;
    const auto& hosts = ((label == Label::Real) != cross) ? reliable_domains() : unreliable_domains();
    const auto& topical = (label == Label::Fake) ? fake_pool() : real_pool();
    return "https://" + hosts[rng.bounded(hosts.size())] + "/" + pick(rng, topical) + "-" +
           pick(rng, topical);
}

std::string make_text(Rng& rng, Label label, bool with_link) {
    const bool flipped = rng.uniform() < kFlipRate;
    const auto& topical = ((label == Label::Fake) != flipped) ? fake_pool() : real_pool();

    std::vector<std::string> words;
    const int n_topic = 3 + static_cast<int>(rng.bounded(4));
    const int n_fill = 3 + static_cast<int>(rng.bounded(4));
    for (int i = 0; i < n_topic; ++i) words.push_back(pick(rng, topical));
    for (int i = 0; i < n_fill; ++i) words.push_back(pick(rng, filler_pool()));
    rng.shuffle(words);

    std::string text;
    for (size_t i = 0; i < words.size(); ++i) {
        if (i) text += ' ';
        text += words[i];
    }
    if (!text.empty()) text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));

    const double punct = rng.uniform();
    if (label == Label::Fake) {
        text += punct < 0.5 ? "!" : (punct < 0.8 ? "." : "");
    } else {
        text += punct < 0.7 ? "." : "";
    }

    if (with_link) {
        const int n_urls = rng.uniform() < 0.8 ? 1 : 2;
        for (int i = 0; i < n_urls; ++i) text += " " + make_url(rng, label);
    }
    return text;
}

struct CellCounts {
    int real_with, real_without, fake_with, fake_without;
};

CellCounts counts_for(SplitSource which) {
    switch (which) {
        case SplitSource::Train: return {2321, 1039, 1002, 2058};
        case SplitSource::Dev: return {780, 340, 327, 693};
        case SplitSource::Test: return {779, 341, 319, 701};
        default: throw DataError("no synthetic data for the ad-hoc split");
    }
}

uint64_t split_stream(SplitSource which, uint64_t seed) {
    return seed * 1000003ULL + static_cast<uint64_t>(which) + 1;
}

} // namespace

std::vector<Post> synthetic_split(SplitSource which, uint64_t seed) {
    const CellCounts cells = counts_for(which);
    Rng rng(split_stream(which, seed));

    struct Slot {
        Label label;
        bool with_link;
    };
    std::vector<Slot> slots;
    slots.reserve(static_cast<size_t>(cells.real_with + cells.real_without + cells.fake_with +
                                      cells.fake_without));
    for (int i = 0; i < cells.real_with; ++i) slots.push_back({Label::Real, true});
    for (int i = 0; i < cells.real_without; ++i) slots.push_back({Label::Real, false});
    for (int i = 0; i < cells.fake_with; ++i) slots.push_back({Label::Fake, true});
    for (int i = 0; i < cells.fake_without; ++i) slots.push_back({Label::Fake, false});
    rng.shuffle(slots);

    std::vector<Post> posts;
    posts.reserve(slots.size());
    for (size_t i = 0; i < slots.size(); ++i) {
        Post p;
        p.id = std::to_string(i + 1);
        p.label = slots[i].label;
        p.source = which;
        p.raw_text = make_text(rng, slots[i].label, slots[i].with_link);
        posts.push_back(std::move(p));
    }
    return posts;
}

void write_split_csv(const std::filesystem::path& path, const std::vector<Post>& posts) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    auto field = [](const std::string& value) {
        if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
        std::string quoted = "\"";
        for (char c : value) {
            quoted += c;
            if (c == '"') quoted += '"';
        }
        quoted += '"';
        return quoted;
    };
    out << "id,tweet,label\n";
    for (const Post& p : posts) {
        out << field(p.id) << ',' << field(p.raw_text) << ',' << label_to_string(p.label) << '\n';
    }
}

std::vector<FactCheckDoc> fixture_corpus() {
    Rng rng(99);
    std::vector<FactCheckDoc> corpus;
    for (int i = 1; i <= 50; ++i) {
        FactCheckDoc d;
        char id[8];
        std::snprintf(id, sizeof id, "fc-%03d", i);
        d.doc_id = id;

        std::vector<std::string> title_words;
        const int n_title = 3 + static_cast<int>(rng.bounded(3));
        for (int w = 0; w < n_title; ++w) title_words.push_back(pick(rng, fake_pool()));
        for (size_t w = 0; w < title_words.size(); ++w) {
            if (w) d.title += ' ';
            d.title += title_words[w];
        }

        for (int s = 0; s < 2; ++s) {
            if (s) d.article += ' ';
            const int n_words = 5 + static_cast<int>(rng.bounded(5));
            for (int w = 0; w < n_words; ++w) {
                if (w) d.article += ' ';
                d.article += (w % 3 == 2) ? pick(rng, filler_pool()) : pick(rng, fake_pool());
            }
            d.article += '.';
        }

        d.verdict = Label::Fake;
        char date[16];
        std::snprintf(date, sizeof date, "2020-%02d-%02d", 1 + (i % 12), 1 + (i % 27));
        d.published_before = date;
        corpus.push_back(std::move(d));
    }
    return corpus;
}

void write_corpus_jsonl(const std::filesystem::path& path,
                        const std::vector<FactCheckDoc>& corpus) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const FactCheckDoc& d : corpus) {
        nlohmann::json j{{"doc_id", d.doc_id},
                         {"title", d.title},
                         {"article", d.article},
                         {"verdict", label_to_string(d.verdict)},
                         {"date", d.published_before}};
        out << j.dump() << '\n';
    }
}

void write_reliability_csv(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "domain,tag\n";
    auto stem = [](const std::string& host) { return host.substr(0, host.find('.')); };
    for (const std::string& host : reliable_domains()) out << stem(host) << ",reliable\n";
    for (const std::string& host : unreliable_domains()) out << stem(host) << ",unreliable\n";
    out << stem(kSatireDomain) << ",satire\n";
}

void write_descriptions_jsonl(const std::filesystem::path& path) {
    // dailyclickbait is intentionally absent so the zero-description slot
    // stays reachable with real assets.
    const std::vector<std::pair<std::string, std::string>> pages = {
        {"healthagency", "The national public health agency publishing official guidance, "
                         "case statistics and vaccination schedules."},
        {"worldhealthdesk", "An international health newsroom covering outbreak surveillance "
                            "and immunization programmes."},
        {"civicfactcheck", "A nonpartisan fact-checking organisation that reviews viral "
                           "claims about public health."},
        {"metrodailynews", "A metropolitan daily newspaper with a dedicated science and "
                           "health desk."},
        {"sciencebulletin", "A digest of peer-reviewed research summarised for a general "
                            "audience."},
        {"hoaxnews", "A website known for fabricated stories and recycled rumours presented "
                     "as breaking news."},
        {"viralcurereport", "A blog promoting unproven remedies and miracle cures through "
                            "sensational headlines."},
        {"truthunveiled", "A conspiracy outlet alleging cover-ups by health authorities and "
                          "pharmaceutical companies."},
        {"shadowhealthwire", "An anonymous newsletter circulating unsourced medical claims "
                             "and fearmongering alerts."},
        {"dailymockery", "A satirical publication writing parody news articles about current "
                         "events."},
    };
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& [title, text] : pages) {
        out << nlohmann::json{{"title", title}, {"text", text}}.dump() << '\n';
    }
}

void write_unshorten_cache(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& [original, final_url] : cached_short_links()) {
        out << nlohmann::json{{"original_url", original},
                              {"final_url", final_url},
                              {"status", "resolved"}}
                   .dump()
            << '\n';
    }
}

std::vector<std::string> fixture_vocab() {
    std::vector<std::string> v = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                  "<URL>", "<EMAIL>", "<PHONE>", "<CUR>", "<NUMBER>", "<DIGIT>"};
    for (const auto* pool : {&fake_pool(), &real_pool(), &filler_pool()}) {
        for (const std::string& w : *pool) v.push_back(w);
    }
    // Description/corpus vocabulary beyond the generator pools.
    for (const char* w :
         {"national", "public", "agency", "case", "schedules", "international", "newsroom",
          "covering", "outbreak", "programmes", "nonpartisan", "organisation", "reviews",
          "viral", "claims", "metropolitan", "daily", "newspaper", "dedicated", "science",
          "desk", "digest", "research", "summarised", "general", "audience", "website",
          "known", "fabricated", "stories", "recycled", "rumours", "presented", "breaking",
          "news", "blog", "promoting", "unproven", "remedies", "cures", "sensational",
          "headlines", "outlet", "alleging", "authorities", "pharmaceutical", "companies",
          "anonymous", "newsletter", "circulating", "unsourced", "medical", "alerts",
          "satirical", "publication", "writing", "parody", "articles", "current", "events"})
        v.push_back(w);
    for (char c = 'a'; c <= 'z'; ++c) {
        v.push_back(std::string(1, c));
        v.push_back("##" + std::string(1, c));
    }
    for (char c = '0'; c <= '9'; ++c) {
        v.push_back(std::string(1, c));
        v.push_back("##" + std::string(1, c));
    }
    for (const char* p : {".", ",", "!", "?", "'", "-", "<", ">", "/", ":"}) v.push_back(p);
    return v;
}

void write_fixture_checkpoint(const std::filesystem::path& dir, uint64_t seed) {
    WordPieceTokenizer tokenizer(fixture_vocab());
    EncoderConfig config;
    config.vocab_size = tokenizer.vocab_size();
    config.d_model = 64;
    config.n_layers = 2;
    config.n_heads = 4;
    config.d_ff = 256;
    config.output_dim = kContentDim;
    config.dropout = 0.1;
    TransformerEncoder encoder(config, seed);
    LoadedEncoder base{std::move(tokenizer), std::move(encoder), {"miniature-lm", "r0"}};

    // A randomly initialized encoder emits a near-constant classification
    // vector (the token's own embedding dominates its residual stream), so
    // frozen-encoder runs would have nothing to learn from. A short warmup on
    // held-out generator posts gives the checkpoint the lexical sensitivity a
    // pretrained model would bring, while staying seed-deterministic.
    Rng rng(seed * 7919 + 13);
    std::vector<Post> warmup;
    for (int i = 0; i < 400; ++i) {
        const Label label = (i % 2 == 0) ? Label::Fake : Label::Real;
        Post p;
        p.id = "warm-" + std::to_string(i);
        p.label = label;
        p.raw_text = make_text(rng, label, false);
        warmup.push_back(std::move(p));
    }
    TrainConfig warm_config;
    warm_config.variant = FeatureVariant::C;
    warm_config.seed = seed;
    warm_config.epochs = 2;
    warm_config.learning_rate = 1e-3;
    const TrainedModel warmed = train_model(warmup, base, PipelineAssets{}, warm_config);
    save_checkpoint(dir, "miniature-lm", warmed.enc.encoder, warmed.enc.tokenizer);
}

void write_all_fixtures(const std::filesystem::path& dir, uint64_t seed) {
    std::filesystem::create_directories(dir);
    write_split_csv(dir / "train.csv", synthetic_split(SplitSource::Train, seed));
    write_split_csv(dir / "dev.csv", synthetic_split(SplitSource::Dev, seed));
    write_split_csv(dir / "test.csv", synthetic_split(SplitSource::Test, seed));
    write_corpus_jsonl(dir / "corpus.jsonl", fixture_corpus());
    write_reliability_csv(dir / "reliability.csv");
    write_descriptions_jsonl(dir / "descriptions.jsonl");
    write_unshorten_cache(dir / "unshorten_cache.jsonl");
    write_fixture_checkpoint(dir / "encoder");
}

} // namespace ecol
