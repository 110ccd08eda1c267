#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ecol/baseline.hpp"
#include "ecol/rng.hpp"

#include <cmath>
#include <string>
#include <vector>

using namespace ecol;

namespace {

double sparse_norm(const SparseVec& x) {
    double s = 0.0;
    for (const auto& [c, v] : x) s += v * v;
    return std::sqrt(s);
}

double svm_objective(const LinearModel& m, const std::vector<SparseVec>& xs,
                     const std::vector<int>& ys, double c) {
    double obj = 0.0;
    for (double w : m.weights) obj += 0.5 * w * w;
    obj += 0.5 * m.bias * m.bias; // bias is an augmented regularized feature
    for (size_t i = 0; i < xs.size(); ++i) {
        obj += c * std::max(0.0, 1.0 - ys[i] * m.decision(xs[i]));
    }
    return obj;
}

double logreg_objective_of(const LinearModel& m, const std::vector<SparseVec>& xs,
                           const std::vector<int>& ys, double c) {
    double obj = 0.0;
    for (double w : m.weights) obj += 0.5 * w * w;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double margin = ys[i] * m.decision(xs[i]);
        obj += c * (margin > 0 ? std::log1p(std::exp(-margin))
                               : -margin + std::log1p(std::exp(margin)));
    }
    return obj;
}

} // namespace

TEST_CASE("tf-idf matches hand-computed values") {
    const std::vector<std::string> docs = {"cat sat", "cat ran", "dog ran ran"};
    TfidfModel model = TfidfModel::fit(docs);
    REQUIRE(model.dim() == 4); // cat dog ran sat, sorted
    CHECK(model.vocab.at("cat") == 0);
    CHECK(model.vocab.at("dog") == 1);
    CHECK(model.vocab.at("ran") == 2);
    CHECK(model.vocab.at("sat") == 3);

    // idf = ln((1+3)/(1+df)) + 1
    CHECK(model.idf[0] == doctest::Approx(std::log(4.0 / 3.0) + 1.0));
    CHECK(model.idf[1] == doctest::Approx(std::log(2.0) + 1.0));
    CHECK(model.idf[3] == doctest::Approx(std::log(2.0) + 1.0));

    SparseVec x = model.transform("dog ran ran");
    REQUIRE(x.size() == 2);
    const double dog = std::log(2.0) + 1.0;
    const double ran = 2.0 * (std::log(4.0 / 3.0) + 1.0);
    const double norm = std::sqrt(dog * dog + ran * ran);
    CHECK(x[0].first == 1);
    CHECK(x[0].second == doctest::Approx(dog / norm));
    CHECK(x[1].first == 2);
    CHECK(x[1].second == doctest::Approx(ran / norm));
    CHECK(sparse_norm(x) == doctest::Approx(1.0));

    // Unseen words are dropped; fully unseen text maps to the empty vector.
    CHECK(model.transform("wombat").empty());
}

TEST_CASE("tf-idf tokenization folds case and drops single characters") {
    TfidfModel model = TfidfModel::fit({"The CAT, cat! a x9 go_od"});
    CHECK(model.vocab.count("the"));
    CHECK(model.vocab.count("cat"));
    CHECK(model.vocab.count("x9"));
    CHECK(model.vocab.count("go_od"));
    CHECK(!model.vocab.count("a"));
    CHECK(!model.vocab.count("x"));
}

TEST_CASE("svm separates a linearly separable toy set") {
    // One indicative feature per class.
    std::vector<SparseVec> xs;
    std::vector<int> ys;
    for (int i = 0; i < 20; ++i) {
        xs.push_back({{0, 1.0}, {2, 0.3}});
        ys.push_back(1);
        xs.push_back({{1, 1.0}, {2, 0.3}});
        ys.push_back(-1);
    }
    LinearModel m = train_svm(xs, ys, 42);
    for (size_t i = 0; i < xs.size(); ++i) {
        CHECK(ys[i] * m.decision(xs[i]) > 0.0);
    }

    // The trained point is a minimum of the hinge objective along random probes.
    const double base = svm_objective(m, xs, ys, 1.0);
    Rng rng(3);
    for (int t = 0; t < 40; ++t) {
        LinearModel probe = m;
        for (double& w : probe.weights) w += rng.gaussian(0, 0.05);
        probe.bias += rng.gaussian(0, 0.05);
        CHECK(svm_objective(probe, xs, ys, 1.0) >= base - 1e-6);
    }
}

TEST_CASE("svm training is deterministic for a fixed seed") {
    Rng data_rng(7);
    std::vector<SparseVec> xs;
    std::vector<int> ys;
    for (int i = 0; i < 60; ++i) {
        SparseVec x;
        for (int j = 0; j < 8; ++j) x.emplace_back(j, data_rng.gaussian(0, 1));
        const int y = data_rng.uniform() < 0.5 ? 1 : -1;
        x[0].second += 1.5 * y;
        xs.push_back(x);
        ys.push_back(y);
    }
    LinearModel a = train_svm(xs, ys, 42);
    LinearModel b = train_svm(xs, ys, 42);
    REQUIRE(a.weights.size() == b.weights.size());
    for (size_t j = 0; j < a.weights.size(); ++j) CHECK(a.weights[j] == b.weights[j]);
    CHECK(a.bias == b.bias);
}

TEST_CASE("logistic regression minimizes its regularized objective") {
    Rng data_rng(19);
    std::vector<SparseVec> xs;
    std::vector<int> ys;
    for (int i = 0; i < 80; ++i) {
        SparseVec x;
        for (int j = 0; j < 5; ++j) x.emplace_back(j, data_rng.gaussian(0, 1));
        const int y = data_rng.uniform() < 0.5 ? 1 : -1;
        x[1].second += y; // informative but noisy
        xs.push_back(x);
        ys.push_back(y);
    }
    LinearModel m = train_logreg(xs, ys);
    const double base = logreg_objective_of(m, xs, ys, 1.0);
    Rng rng(4);
    for (int t = 0; t < 40; ++t) {
        LinearModel probe = m;
        for (double& w : probe.weights) w += rng.gaussian(0, 0.02);
        probe.bias += rng.gaussian(0, 0.02);
        CHECK(logreg_objective_of(probe, xs, ys, 1.0) >= base - 1e-8);
    }

    // Training twice gives identical weights (no randomness in the solver).
    LinearModel again = train_logreg(xs, ys);
    for (size_t j = 0; j < m.weights.size(); ++j) CHECK(m.weights[j] == again.weights[j]);
    CHECK(m.bias == again.bias);
}

TEST_CASE("logreg probabilities are symmetric on a balanced symmetric set") {
    std::vector<SparseVec> xs;
    std::vector<int> ys;
    for (int i = 0; i < 30; ++i) {
        xs.push_back({{0, 1.0}});
        ys.push_back(1);
        xs.push_back({{0, -1.0}});
        ys.push_back(-1);
    }
    LinearModel m = train_logreg(xs, ys);
    CHECK(std::fabs(m.bias) < 1e-4);
    CHECK(m.decision({{0, 1.0}}) > 0.5);
}

TEST_CASE("end-to-end baseline on separable text reaches perfect weighted F1") {
    DatasetSplit train, eval;
    train.source = SplitSource::Train;
    eval.source = SplitSource::Dev;
    for (int i = 0; i < 30; ++i) {
        Post p;
        p.id = "t" + std::to_string(i);
        p.label = i % 2 ? Label::Fake : Label::Real;
        p.raw_text = i % 2 ? "miracle cure hoax number " + std::to_string(i)
                           : "official health guidance update " + std::to_string(i);
        train.posts.push_back(p);
    }
    for (int i = 0; i < 10; ++i) {
        Post p;
        p.id = "e" + std::to_string(i);
        p.label = i % 2 ? Label::Fake : Label::Real;
        p.raw_text = i % 2 ? "another miracle cure hoax" : "official guidance again";
        eval.posts.push_back(p);
    }

    std::vector<Prediction> preds;
    MetricsReport svm = tfidf_baseline(train, eval, BaselineClassifier::Svm, 42, &preds);
    CHECK(round2(svm.weighted_f1) == 100.00);
    CHECK(preds.size() == eval.posts.size());

    MetricsReport lr = tfidf_baseline(train, eval, BaselineClassifier::LogReg);
    CHECK(round2(lr.weighted_f1) == 100.00);
}
