#include "ecol/model.hpp"

#include "ecol/errors.hpp"

#include <cmath>
#include <fstream>

namespace ecol {

std::string variant_to_string(FeatureVariant v) {
    switch (v) {
        case FeatureVariant::C: return "C";
        case FeatureVariant::PK: return "PK";
        case FeatureVariant::C_PK: return "C_PK";
        case FeatureVariant::C_S: return "C_S";
        case FeatureVariant::C_PK_S: return "C_PK_S";
    }
    return "C";
}

FeatureVariant variant_from_string(const std::string& s) {
    if (s == "C") return FeatureVariant::C;
    if (s == "PK") return FeatureVariant::PK;
    if (s == "C_PK") return FeatureVariant::C_PK;
    if (s == "C_S") return FeatureVariant::C_S;
    if (s == "C_PK_S") return FeatureVariant::C_PK_S;
    throw DataError("unknown feature variant: " + s +
                    " (expected one of C, PK, C_PK, C_S, C_PK_S)");
}

bool variant_uses_content(FeatureVariant v) {
    return v != FeatureVariant::PK;
}

bool variant_uses_relatedness(FeatureVariant v) {
    return v == FeatureVariant::PK || v == FeatureVariant::C_PK || v == FeatureVariant::C_PK_S;
}

bool variant_uses_sources(FeatureVariant v) {
    return v == FeatureVariant::C_S || v == FeatureVariant::C_PK_S;
}

int variant_dim(FeatureVariant v) {
    int dim = 0;
    if (variant_uses_content(v)) dim += kContentDim;
    if (variant_uses_relatedness(v)) dim += kRelatednessDim;
    if (variant_uses_sources(v)) dim += kSourceFeatureDim;
    return dim;
}

Vec assemble_features(FeatureVariant v, const std::optional<Vec>& content,
                      const std::optional<double>& relatedness,
                      const std::optional<Vec>& sources) {
    Vec out(variant_dim(v));
    Eigen::Index at = 0;
    if (variant_uses_content(v)) {
        if (!content) throw DataError("variant " + variant_to_string(v) + " requires the content vector");
        if (content->size() != kContentDim) {
            throw DataError("content vector must have dimension 768");
        }
        out.segment(at, kContentDim) = *content;
        at += kContentDim;
    }
    if (variant_uses_relatedness(v)) {
        if (!relatedness) {
            throw DataError("variant " + variant_to_string(v) + " requires the relatedness score");
        }
        out[at++] = *relatedness;
    }
    if (variant_uses_sources(v)) {
        if (!sources) throw DataError("variant " + variant_to_string(v) + " requires the source block");
        if (sources->size() != kSourceFeatureDim) {
            throw DataError("source block must have dimension 3860");
        }
        out.segment(at, kSourceFeatureDim) = *sources;
        at += kSourceFeatureDim;
    }
    return out;
}

Eigen::Vector2d softmax2(const Eigen::Vector2d& logits) {
    const double m = logits.maxCoeff();
    Eigen::Vector2d e = (logits.array() - m).exp();
    return e / e.sum();
}

Prediction make_prediction(const std::string& post_id, const Eigen::Vector2d& probs) {
    Prediction p;
    p.post_id = post_id;
    p.prob_fake = probs[kLogitFake];
    p.prob_real = probs[kLogitReal];
    p.label = p.prob_fake > p.prob_real ? Label::Fake : Label::Real;
    return p;
}

FusionLayer::FusionLayer(int in_dim) : w_(Mat::Zero(in_dim, 2)), b_(Eigen::Vector2d::Zero()) {
    if (in_dim <= 0) throw DataError("fusion layer input dimension must be positive");
}

FusionLayer::FusionLayer(int in_dim, Rng& rng) : FusionLayer(in_dim) {
    for (Eigen::Index i = 0; i < w_.rows(); ++i) {
        for (Eigen::Index j = 0; j < w_.cols(); ++j) {
            w_(i, j) = rng.gaussian(0.0, 0.02);
        }
    }
}

Eigen::Vector2d FusionLayer::logits(const Vec& features) const {
    if (features.size() != w_.rows()) {
        throw DataError("feature dimension " + std::to_string(features.size()) +
                        " does not match fusion layer input " + std::to_string(w_.rows()));
    }
    return w_.transpose() * features + b_;
}

Vec FusionLayer::backward(const Vec& features, const Eigen::Vector2d& dlogits, Mat& dw,
                          Eigen::Vector2d& db) const {
    dw += features * dlogits.transpose();
    db += dlogits;
    return w_ * dlogits;
}

std::vector<std::pair<double*, size_t>> FusionLayer::param_blocks() {
    return {{w_.data(), static_cast<size_t>(w_.size())}, {b_.data(), 2}};
}

std::vector<std::pair<const double*, size_t>> FusionLayer::param_blocks() const {
    return {{w_.data(), static_cast<size_t>(w_.size())}, {b_.data(), 2}};
}

void FusionLayer::save(const std::filesystem::path& file) const {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write fusion layer: " + file.string());
    out.write("ECOLF001", 8);
    const int64_t dim = w_.rows();
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    out.write(reinterpret_cast<const char*>(w_.data()),
              static_cast<std::streamsize>(static_cast<size_t>(w_.size()) * sizeof(double)));
    out.write(reinterpret_cast<const char*>(b_.data()), 2 * sizeof(double));
}

FusionLayer FusionLayer::load(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open fusion layer: " + file.string());
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::string(magic, 8) != "ECOLF001") {
        throw DataError("bad fusion layer header: " + file.string());
    }
    int64_t dim = 0;
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    if (dim <= 0 || dim > (1 << 24)) throw DataError("corrupt fusion layer dimension");
    FusionLayer layer(static_cast<int>(dim));
    in.read(reinterpret_cast<char*>(layer.w_.data()),
            static_cast<std::streamsize>(static_cast<size_t>(layer.w_.size()) * sizeof(double)));
    in.read(reinterpret_cast<char*>(layer.b_.data()), 2 * sizeof(double));
    if (!in) throw DataError("fusion layer file truncated: " + file.string());
    return layer;
}

double cross_entropy(const Eigen::Vector2d& probs, Label gold) {
    if (gold != Label::Fake && gold != Label::Real) {
        throw DataError("training labels must be fake or real");
    }
    const int idx = gold == Label::Fake ? kLogitFake : kLogitReal;
    return -std::log(std::max(probs[idx], 1e-300));
}

Eigen::Vector2d cross_entropy_dlogits(const Eigen::Vector2d& probs, Label gold) {
    if (gold != Label::Fake && gold != Label::Real) {
        throw DataError("training labels must be fake or real");
    }
    Eigen::Vector2d d = probs;
    d[gold == Label::Fake ? kLogitFake : kLogitReal] -= 1.0;
    return d;
}

Prediction classify(const FusionLayer& layer, const std::string& post_id, const Vec& features) {
    return make_prediction(post_id, softmax2(layer.logits(features)));
}

Prediction average_predictions(const std::string& post_id,
                               const std::vector<Eigen::Vector2d>& member_probs) {
    if (member_probs.empty()) throw DataError("ensemble requires at least one member");
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const Eigen::Vector2d& p : member_probs) mean += p;
    mean /= static_cast<double>(member_probs.size());
    return make_prediction(post_id, mean);
}

} // namespace ecol
