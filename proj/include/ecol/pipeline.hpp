#pragma once

#include "ecol/data.hpp"
#include "ecol/encoder.hpp"
#include "ecol/model.hpp"
#include "ecol/retrieval.hpp"
#include "ecol/sources.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ecol {

// External resources a variant may require. Relatedness variants need the
// search index; source variants need the unshortener, reliability map and
// description map.
struct PipelineAssets {
    const SearchIndex* index = nullptr;
    Unshortener* unshortener = nullptr;
    const ReliabilityMap* reliability = nullptr;
    const DescriptionMap* descriptions = nullptr;
    SourceFeatureConfig source_config;
};

// Throws naming the first asset missing for the variant.
void require_assets(FeatureVariant variant, const PipelineAssets& assets);

struct TrainConfig {
    FeatureVariant variant = FeatureVariant::C;
    uint64_t seed = 42;
    int epochs = 3;
    int batch_size = 1;
    double learning_rate = 2e-5;
    // Fine-tune the encoder (default). When false the encoder stays frozen,
    // features are precomputed once, and only the fusion layer trains.
    bool train_encoder = true;
};

// Digest of the hyperparameters that shape a trained model, recorded in the
// model manifest so ensembles can verify they were trained alike.
std::string train_config_digest(const TrainConfig& config);

// Description text -> 768-dim embedding, computed once from the starting
// encoder and frozen through training and prediction.
using DescEmbeddingTable = std::map<std::string, Vec>;

DescEmbeddingTable precompute_description_embeddings(const DescriptionMap& descriptions,
                                                     const LoadedEncoder& base,
                                                     bool include_empty);

struct TrainedModel {
    FeatureVariant variant = FeatureVariant::C;
    uint64_t seed = 42;
    int epochs = 3;
    int batch_size = 1;
    double learning_rate = 2e-5;
    bool encoder_trained = true;
    std::string dataset_digest;
    std::string config_digest;
    EncoderLock base_lock; // checkpoint training started from
    LoadedEncoder enc;     // tokenizer + (possibly fine-tuned) encoder
    FusionLayer fusion;
    DescEmbeddingTable desc_embeddings; // only for source variants
    SourceFeatureConfig source_config;

    void save(const std::filesystem::path& dir) const;
    static TrainedModel load(const std::filesystem::path& dir);
};

// Trains one model from the given starting encoder. All randomness (fusion
// init, epoch shuffling, dropout) is drawn from a single generator seeded
// with config.seed, so same-machine reruns are bitwise identical. Retrieval
// results are fetched once per post before training and frozen; the retrieved
// documents are re-encoded every step so gradients flow through both the
// post and document encodings. Source blocks are frozen features. Per-epoch
// mean losses are appended to epoch_losses when given; a non-finite loss
// aborts with diagnostics.
TrainedModel train_model(const std::vector<Post>& dataset, const LoadedEncoder& base,
                         const PipelineAssets& assets, const TrainConfig& config,
                         std::vector<double>* epoch_losses = nullptr);

// Deterministic inference (no dropout); output order follows input order.
std::vector<Prediction> predict(const TrainedModel& model, const std::vector<Post>& posts,
                                const PipelineAssets& assets);

// Mean of member probabilities per post; ties go to real. All members must
// share one variant.
std::vector<Prediction> predict_ensemble(const std::vector<const TrainedModel*>& models,
                                         const std::vector<Post>& posts,
                                         const PipelineAssets& assets);

} // namespace ecol
