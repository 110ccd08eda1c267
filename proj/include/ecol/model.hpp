#pragma once

#include "ecol/encoder.hpp"
#include "ecol/preprocess.hpp"
#include "ecol/rng.hpp"
#include "ecol/sources.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ecol {

// Feature variants: content vector C, relatedness scalar R (prior knowledge),
// source block S. Concatenation order is always [C ‖ R ‖ S] restricted to the
// included parts.
enum class FeatureVariant { C, PK, C_PK, C_S, C_PK_S };

constexpr int kRelatednessDim = 1;

std::string variant_to_string(FeatureVariant v);
FeatureVariant variant_from_string(const std::string& s);

int variant_dim(FeatureVariant v); // 768 / 1 / 769 / 4628 / 4629
bool variant_uses_content(FeatureVariant v);
bool variant_uses_relatedness(FeatureVariant v);
bool variant_uses_sources(FeatureVariant v);

// Components not required by the variant may be absent; required ones must
// be present and correctly sized.
Vec assemble_features(FeatureVariant v, const std::optional<Vec>& content,
                      const std::optional<double>& relatedness,
                      const std::optional<Vec>& sources);

// Logit coordinate order for the two-way classifier.
constexpr int kLogitFake = 0;
constexpr int kLogitReal = 1;

Eigen::Vector2d softmax2(const Eigen::Vector2d& logits);

struct Prediction {
    std::string post_id;
    double prob_fake = 0.0;
    double prob_real = 0.0;
    Label label = Label::Unknown;
};

// Label = argmax probability; exact ties go to real.
Prediction make_prediction(const std::string& post_id, const Eigen::Vector2d& probs);

// Single affine map from the assembled feature vector to two logits.
class FusionLayer {
public:
    explicit FusionLayer(int in_dim);
    FusionLayer(int in_dim, Rng& rng); // gaussian init, stddev 0.02

    int in_dim() const { return static_cast<int>(w_.rows()); }

    Eigen::Vector2d logits(const Vec& features) const;

    // Accumulates parameter gradients and returns d(loss)/d(features).
    Vec backward(const Vec& features, const Eigen::Vector2d& dlogits, Mat& dw,
                 Eigen::Vector2d& db) const;

    std::vector<std::pair<double*, size_t>> param_blocks();
    std::vector<std::pair<const double*, size_t>> param_blocks() const;

    void save(const std::filesystem::path& file) const;
    static FusionLayer load(const std::filesystem::path& file);

    const Mat& weights() const { return w_; }
    const Eigen::Vector2d& bias() const { return b_; }

private:
    Mat w_; // in_dim x 2
    Eigen::Vector2d b_;
};

double cross_entropy(const Eigen::Vector2d& probs, Label gold);
Eigen::Vector2d cross_entropy_dlogits(const Eigen::Vector2d& probs, Label gold);

Prediction classify(const FusionLayer& layer, const std::string& post_id, const Vec& features);

// Arithmetic mean of member probability vectors; ties go to real.
Prediction average_predictions(const std::string& post_id,
                               const std::vector<Eigen::Vector2d>& member_probs);

} // namespace ecol
