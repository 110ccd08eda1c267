#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ecol/data.hpp"
#include "ecol/errors.hpp"
#include "ecol/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace ecol;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() / ("ecol_pipeline_test_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> test_vocab() {
    std::vector<std::string> v = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "<URL>"};
    for (const char* w :
         {"miracle", "cure", "hoax", "fraud", "fake", "official", "health", "guidance",
          "update", "vaccine", "report", "study", "virus", "cases", "claim", "false",
          "news", "agency", "confirmed", "the", "of", "broadcaster", "public",
          "spread", "garlic", "water", "remedy", "doctors", "warn"})
        v.push_back(w);
    for (char c = 'a'; c <= 'z'; ++c) {
        v.push_back(std::string(1, c));
        v.push_back("##" + std::string(1, c));
    }
    for (char c = '0'; c <= '9'; ++c) {
        v.push_back(std::string(1, c));
        v.push_back("##" + std::string(1, c));
    }
    return v;
}

// Tiny encoder so training tests stay fast; dropout 0 keeps them smooth.
LoadedEncoder tiny_encoder(double dropout = 0.0) {
    WordPieceTokenizer tokenizer(test_vocab());
    EncoderConfig config;
    config.vocab_size = tokenizer.vocab_size();
    config.d_model = 16;
    config.n_layers = 1;
    config.n_heads = 2;
    config.d_ff = 32;
    config.output_dim = kContentDim;
    config.dropout = dropout;
    TransformerEncoder encoder(config, 1234);
    return LoadedEncoder{std::move(tokenizer), std::move(encoder), EncoderLock{"tiny", "r0"}};
}

Post make_post(const std::string& id, Label label, const std::string& text) {
    Post p;
    p.id = id;
    p.label = label;
    p.raw_text = text;
    return p;
}

// Ten posts, five per class, with strongly separable wording.
std::vector<Post> fixture_posts() {
    std::vector<Post> posts;
    for (int i = 0; i < 5; ++i) {
        posts.push_back(make_post("f" + std::to_string(i), Label::Fake,
                                  "miracle cure hoax claim " + std::to_string(i)));
        posts.push_back(make_post("r" + std::to_string(i), Label::Real,
                                  "official health guidance update " + std::to_string(i)));
    }
    return posts;
}

std::vector<FactCheckDoc> fixture_corpus() {
    std::vector<FactCheckDoc> corpus;
    const char* texts[] = {
        "miracle cure hoax spread", "garlic water remedy false", "fake vaccine claim",
        "virus cases fraud",        "doctors warn hoax",         "false news report",
    };
    int id = 0;
    for (const char* t : texts) {
        FactCheckDoc d;
        d.doc_id = "d" + std::to_string(id++);
        d.title = t;
        d.article = std::string(t) + " study confirmed";
        d.verdict = Label::Fake;
        d.published_before = "2019-01-01";
        corpus.push_back(d);
    }
    return corpus;
}

} // namespace

TEST_CASE("same seed gives bitwise-identical models and predictions") {
    const LoadedEncoder base = tiny_encoder(0.1); // dropout exercised
    PipelineAssets assets;
    TrainConfig config;
    config.variant = FeatureVariant::C;
    config.seed = 42;
    config.epochs = 2;
    config.learning_rate = 1e-4;

    const auto posts = fixture_posts();
    TrainedModel a = train_model(posts, base, assets, config);
    TrainedModel b = train_model(posts, base, assets, config);

    CHECK(a.enc.encoder.weights_hash() == b.enc.encoder.weights_hash());
    CHECK((a.fusion.weights() - b.fusion.weights()).norm() == 0.0);
    CHECK((a.fusion.bias() - b.fusion.bias()).norm() == 0.0);

    const auto eval = fixture_posts();
    const auto pa = predict(a, eval, assets);
    const auto pb = predict(b, eval, assets);
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].prob_fake == pb[i].prob_fake); // bitwise
        CHECK(pa[i].label == pb[i].label);
    }
}

TEST_CASE("seeds 42, 0, 36 produce three distinct models") {
    const LoadedEncoder base = tiny_encoder();
    PipelineAssets assets;
    TrainConfig config;
    config.variant = FeatureVariant::C;
    config.epochs = 1;
    config.learning_rate = 1e-4;

    const auto posts = fixture_posts();
    std::vector<uint64_t> seeds = {42, 0, 36};
    std::vector<TrainedModel> models;
    for (uint64_t s : seeds) {
        config.seed = s;
        models.push_back(train_model(posts, base, assets, config));
    }
    CHECK((models[0].fusion.weights() - models[1].fusion.weights()).norm() > 0.0);
    CHECK((models[0].fusion.weights() - models[2].fusion.weights()).norm() > 0.0);
    CHECK((models[1].fusion.weights() - models[2].fusion.weights()).norm() > 0.0);
    CHECK(models[0].enc.encoder.weights_hash() != models[1].enc.encoder.weights_hash());
}

TEST_CASE("loss strictly decreases over three epochs on the ten-post fixture") {
    const LoadedEncoder base = tiny_encoder();
    PipelineAssets assets;
    TrainConfig config;
    config.variant = FeatureVariant::C;
    config.seed = 42;
    config.epochs = 3;
    // Batch-1 adaptive-moment training plateaus near ln 2 at tiny rates on a
    // fresh random fusion head; this rate clears the transient so the trend
    // is visible within three epochs (checked for all three shipped seeds).
    config.learning_rate = 3e-3;

    std::vector<double> losses;
    for (uint64_t seed : {uint64_t{42}, uint64_t{0}, uint64_t{36}}) {
        config.seed = seed;
        losses.clear();
        train_model(fixture_posts(), base, assets, config, &losses);
        REQUIRE(losses.size() == 3);
        CHECK(losses[1] < losses[0]);
        CHECK(losses[2] < losses[1]);
    }
}

TEST_CASE("relatedness training reaches the encoder through retrieval") {
    const LoadedEncoder base = tiny_encoder();
    const SearchIndex index = SearchIndex::build(fixture_corpus());
    PipelineAssets assets;
    assets.index = &index;

    TrainConfig config;
    config.variant = FeatureVariant::PK;
    config.seed = 42;
    config.epochs = 1;
    config.learning_rate = 1e-3;

    const auto posts = fixture_posts();
    TrainedModel model = train_model(posts, base, assets, config);
    // Gradients flowed through FN and P into the shared encoder.
    CHECK(model.enc.encoder.weights_hash() != base.encoder.weights_hash());
    CHECK(model.fusion.in_dim() == 1);

    const auto preds = predict(model, posts, assets);
    REQUIRE(preds.size() == posts.size());
    for (const auto& p : preds) {
        CHECK(p.prob_fake + p.prob_real == doctest::Approx(1.0).epsilon(1e-9));
        CHECK((p.label == Label::Fake || p.label == Label::Real));
    }
}

TEST_CASE("missing assets are reported per variant") {
    const LoadedEncoder base = tiny_encoder();
    PipelineAssets assets; // nothing provided
    TrainConfig config;
    config.epochs = 1;

    config.variant = FeatureVariant::PK;
    CHECK_THROWS_AS(train_model(fixture_posts(), base, assets, config), DataError);
    config.variant = FeatureVariant::C_S;
    CHECK_THROWS_AS(train_model(fixture_posts(), base, assets, config), DataError);

    config.variant = FeatureVariant::C;
    CHECK_THROWS_AS(train_model({}, base, assets, config), DataError); // empty dataset

    auto unlabeled = fixture_posts();
    unlabeled[0].label = Label::Unknown;
    CHECK_THROWS_AS(train_model(unlabeled, base, assets, config), DataError);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
    const LoadedEncoder base = tiny_encoder();
    PipelineAssets assets;
    TrainConfig config;
    config.variant = FeatureVariant::C;
    config.epochs = 1;
    config.learning_rate = 1e300; // blows the weights up on the first step

    CHECK_THROWS_WITH_AS(train_model(fixture_posts(), base, assets, config),
                         doctest::Contains("non-finite"), DataError);
}

TEST_CASE("frozen-encoder training leaves the encoder untouched") {
    const LoadedEncoder base = tiny_encoder();
    PipelineAssets assets;
    TrainConfig config;
    config.variant = FeatureVariant::C;
    config.seed = 7;
    config.epochs = 3;
    config.learning_rate = 1e-3;
    config.train_encoder = false;

    std::vector<double> losses;
    TrainedModel model = train_model(fixture_posts(), base, assets, config, &losses);
    CHECK(model.enc.encoder.weights_hash() == base.encoder.weights_hash());
    CHECK(model.fusion.weights().norm() > 0.0);
    REQUIRE(losses.size() == 3);
    CHECK(losses[2] < losses[0]);
    CHECK(!model.encoder_trained);
}

TEST_CASE("source-variant training snapshots description embeddings") {
    const fs::path dir = temp_dir();
    // Offline cache with one resolvable short link.
    {
        std::ofstream cache(dir / "cache.jsonl");
        cache << R"({"original_url":"https://bit.ly/x1","final_url":"https://hoaxnews.com/story","status":"resolved"})"
              << "\n";
    }
    UnshortenerConfig ucfg;
    ucfg.cache_file = dir / "cache.jsonl";
    Unshortener unshortener(ucfg);

    ReliabilityMap reliability;
    reliability.insert("hoaxnews", ReliabilityTag::Unreliable);
    DescriptionMap descriptions;
    descriptions.insert("hoaxnews", "A website known for fabricated stories.");

    const SearchIndex index = SearchIndex::build(fixture_corpus());
    PipelineAssets assets;
    assets.index = &index;
    assets.unshortener = &unshortener;
    assets.reliability = &reliability;
    assets.descriptions = &descriptions;

    const LoadedEncoder base = tiny_encoder();
    TrainConfig config;
    config.variant = FeatureVariant::C_PK_S;
    config.seed = 42;
    config.epochs = 1;
    config.learning_rate = 1e-4;

    auto posts = fixture_posts();
    posts[0].raw_text += " https://bit.ly/x1";
    TrainedModel model = train_model(posts, base, assets, config);
    CHECK(model.fusion.in_dim() == 4629);
    // One description, embedded once with the starting encoder.
    REQUIRE(model.desc_embeddings.size() == 1);
    const Vec& emb = model.desc_embeddings.begin()->second;
    const Vec expected =
        base.encode_text(normalize_text("A website known for fabricated stories."));
    CHECK((emb - expected).norm() == 0.0);

    const auto preds = predict(model, posts, assets);
    REQUIRE(preds.size() == posts.size());

    // Round trip through the model directory preserves behavior bitwise.
    const fs::path model_dir = dir / "model";
    model.save(model_dir);
    TrainedModel loaded = TrainedModel::load(model_dir);
    CHECK(loaded.variant == FeatureVariant::C_PK_S);
    CHECK(loaded.seed == 42);
    CHECK(loaded.dataset_digest == model.dataset_digest);
    CHECK(loaded.config_digest == model.config_digest);
    CHECK(loaded.base_lock.name == "tiny");
    CHECK(loaded.desc_embeddings.size() == 1);

    const auto reload_preds = predict(loaded, posts, assets);
    REQUIRE(reload_preds.size() == preds.size());
    for (size_t i = 0; i < preds.size(); ++i) {
        CHECK(reload_preds[i].prob_fake == preds[i].prob_fake);
        CHECK(reload_preds[i].prob_real == preds[i].prob_real);
    }
    fs::remove_all(dir);
}

TEST_CASE("model save/load round-trips the plain content variant") {
    const fs::path dir = temp_dir();
    const LoadedEncoder base = tiny_encoder();
    PipelineAssets assets;
    TrainConfig config;
    config.variant = FeatureVariant::C;
    config.seed = 36;
    config.epochs = 1;
    config.learning_rate = 1e-4;

    const auto posts = fixture_posts();
    TrainedModel model = train_model(posts, base, assets, config);
    model.save(dir / "m");
    TrainedModel loaded = TrainedModel::load(dir / "m");
    CHECK(loaded.enc.encoder.weights_hash() == model.enc.encoder.weights_hash());

    const auto before = predict(model, posts, assets);
    const auto after = predict(loaded, posts, assets);
    for (size_t i = 0; i < before.size(); ++i)
        CHECK(before[i].prob_fake == after[i].prob_fake);

    CHECK_THROWS_AS(TrainedModel::load(dir / "nope"), DataError);
    fs::remove_all(dir);
}

TEST_CASE("ensemble prediction averages member probabilities") {
    const LoadedEncoder base = tiny_encoder();
    PipelineAssets assets;
    TrainConfig config;
    config.variant = FeatureVariant::C;
    config.epochs = 1;
    config.learning_rate = 1e-4;

    const auto posts = fixture_posts();
    config.seed = 42;
    TrainedModel m1 = train_model(posts, base, assets, config);
    config.seed = 0;
    TrainedModel m2 = train_model(posts, base, assets, config);

    const auto p1 = predict(m1, posts, assets);
    const auto p2 = predict(m2, posts, assets);
    const auto ens = predict_ensemble({&m1, &m2}, posts, assets);
    REQUIRE(ens.size() == posts.size());
    for (size_t i = 0; i < ens.size(); ++i) {
        CHECK(ens[i].prob_fake == doctest::Approx((p1[i].prob_fake + p2[i].prob_fake) / 2)
                                      .epsilon(1e-12));
    }

    // Single member equals the plain forward.
    const auto solo = predict_ensemble({&m1}, posts, assets);
    for (size_t i = 0; i < solo.size(); ++i) CHECK(solo[i].prob_fake == p1[i].prob_fake);

    // Mixed variants are rejected.
    TrainConfig pk = config;
    pk.variant = FeatureVariant::PK;
    const SearchIndex index = SearchIndex::build(fixture_corpus());
    PipelineAssets pk_assets;
    pk_assets.index = &index;
    TrainedModel m3 = train_model(posts, base, pk_assets, pk);
    CHECK_THROWS_AS(predict_ensemble({&m1, &m3}, posts, assets), DataError);

    CHECK_THROWS_AS(predict_ensemble({}, posts, assets), DataError);
}

TEST_CASE("config digest tracks hyperparameters") {
    TrainConfig a, b;
    CHECK(train_config_digest(a) == train_config_digest(b));
    b.seed = 1;
    CHECK(train_config_digest(a) != train_config_digest(b));
    b = a;
    b.variant = FeatureVariant::C_PK;
    CHECK(train_config_digest(a) != train_config_digest(b));
    b = a;
    b.learning_rate = 1e-3;
    CHECK(train_config_digest(a) != train_config_digest(b));
}
