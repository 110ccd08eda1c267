#include "ecol/pipeline.hpp"

#include "ecol/errors.hpp"
#include "ecol/hash.hpp"
#include "ecol/optim.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ecol {

namespace {

// Frozen per-post pieces computed before training: token sequences for the
// post and its retrieved documents, plus the static source block.
struct FrozenPost {
    std::string id;
    Label label = Label::Unknown;
    TokenSequence seq;
    std::vector<TokenSequence> doc_seqs;
    std::optional<Vec> sources;
};

TextEncoder table_encoder(const DescEmbeddingTable* table, const LoadedEncoder* fallback) {
    return [table, fallback](const std::string& text) -> Vec {
        auto it = table->find(text);
        if (it != table->end()) return it->second;
        // Only reachable when prediction-time assets differ from the ones the
        // model was trained with; degrade to the current encoder.
        return fallback->encode_text(normalize_text(text));
    };
}

FrozenPost freeze_post(const Post& post, const LoadedEncoder& enc, const PipelineAssets& assets,
                       FeatureVariant variant, const DescEmbeddingTable& desc_table) {
    FrozenPost frozen;
    frozen.id = post.id;
    frozen.label = post.label;
    const PreprocessedPost pre = preprocess(post);
    frozen.seq = enc.tokenizer.encode(pre.normalized_text);
    if (variant_uses_relatedness(variant)) {
        const RetrievalResult result = assets.index->search(pre.normalized_text);
        frozen.doc_seqs.reserve(result.docs.size());
        for (const auto& doc : result.docs) {
            const std::string text = normalize_text(combine_document_text(doc.title, doc.article));
            frozen.doc_seqs.push_back(enc.tokenizer.encode(text));
        }
    }
    if (variant_uses_sources(variant)) {
        frozen.sources = source_feature(pre, *assets.unshortener, *assets.reliability,
                                        *assets.descriptions, table_encoder(&desc_table, &enc),
                                        assets.source_config);
    }
    return frozen;
}

// Mean of the document encodings (training-path twin of
// prior_knowledge_vector, which works from a RetrievalResult).
Vec mean_of(const std::vector<Vec>& vs) {
    Vec m = Vec::Zero(vs.front().size());
    for (const Vec& v : vs) m += v;
    return m / static_cast<double>(vs.size());
}

void scale_blocks(std::vector<std::pair<double*, size_t>>& blocks, double factor) {
    for (auto& [ptr, len] : blocks) {
        for (size_t i = 0; i < len; ++i) ptr[i] *= factor;
    }
}

void zero_blocks(std::vector<std::pair<double*, size_t>>& blocks) {
    for (auto& [ptr, len] : blocks) std::fill(ptr, ptr + len, 0.0);
}

} // namespace

void require_assets(FeatureVariant variant, const PipelineAssets& assets) {
    if (variant_uses_relatedness(variant)) {
        if (!assets.index || !assets.index->built())
            throw DataError("variant " + variant_to_string(variant) +
                            " requires a built retrieval index");
    }
    if (variant_uses_sources(variant)) {
        if (!assets.unshortener)
            throw DataError("variant " + variant_to_string(variant) + " requires an unshortener");
        if (!assets.reliability)
            throw DataError("variant " + variant_to_string(variant) +
                            " requires a reliability map");
        if (!assets.descriptions)
            throw DataError("variant " + variant_to_string(variant) +
                            " requires a description map");
    }
}

std::string train_config_digest(const TrainConfig& config) {
    std::ostringstream s;
    s << variant_to_string(config.variant) << '|' << config.seed << '|' << config.epochs << '|'
      << config.batch_size << '|' << config.learning_rate << '|' << config.train_encoder;
    return hash_hex(fnv1a64(s.str()));
}

DescEmbeddingTable precompute_description_embeddings(const DescriptionMap& descriptions,
                                                     const LoadedEncoder& base,
                                                     bool include_empty) {
    DescEmbeddingTable table;
    for (const auto& [title, text] : descriptions.entries()) {
        if (!table.count(text)) table.emplace(text, base.encode_text(normalize_text(text)));
    }
    if (include_empty && !table.count(std::string())) {
        table.emplace(std::string(), base.encode_text(normalize_text("")));
    }
    return table;
}

namespace {

struct StepGrads {
    EncoderParams enc;
    Mat fusion_w;
    Eigen::Vector2d fusion_b;
};

// One forward/backward over a single post. Returns the loss; accumulates
// parameter gradients.
double train_step(const FrozenPost& post, const TransformerEncoder& encoder,
                  const FusionLayer& fusion, FeatureVariant variant, Rng* dropout_rng,
                  StepGrads& grads) {
    TransformerEncoder::Trace post_trace;
    const Vec p = encoder.forward(post.seq, post_trace, dropout_rng);

    std::vector<TransformerEncoder::Trace> doc_traces;
    std::vector<Vec> doc_encodings;
    std::optional<double> r;
    Vec fn;
    if (variant_uses_relatedness(variant)) {
        doc_traces.resize(post.doc_seqs.size());
        doc_encodings.reserve(post.doc_seqs.size());
        for (size_t i = 0; i < post.doc_seqs.size(); ++i) {
            doc_encodings.push_back(encoder.forward(post.doc_seqs[i], doc_traces[i], dropout_rng));
        }
        fn = mean_of(doc_encodings);
        r = relatedness(fn, p);
    }

    const Vec features = assemble_features(
        variant, variant_uses_content(variant) ? std::optional<Vec>(p) : std::nullopt, r,
        post.sources);
    const Eigen::Vector2d probs = softmax2(fusion.logits(features));
    const double loss = cross_entropy(probs, post.label);

    const Eigen::Vector2d dlogits = cross_entropy_dlogits(probs, post.label);
    const Vec dfeatures = fusion.backward(features, dlogits, grads.fusion_w, grads.fusion_b);

    Vec dp = Vec::Zero(p.size());
    Eigen::Index at = 0;
    if (variant_uses_content(variant)) {
        dp += dfeatures.segment(0, kContentDim);
        at += kContentDim;
    }
    if (variant_uses_relatedness(variant)) {
        const double dr = dfeatures[at];
        Vec dfn = Vec::Zero(fn.size());
        relatedness_backward(fn, p, dr, dfn, dp);
        const Vec ddoc = dfn / static_cast<double>(doc_traces.size());
        for (const auto& trace : doc_traces) encoder.backward(trace, ddoc, grads.enc);
    }
    encoder.backward(post_trace, dp, grads.enc);
    return loss;
}

void check_finite(double loss, const FrozenPost& post, int epoch, size_t step) {
    if (std::isfinite(loss)) return;
    std::ostringstream msg;
    msg << "non-finite loss " << loss << " at epoch " << epoch + 1 << ", step " << step + 1
        << ", post '" << post.id << "'";
    throw DataError(msg.str());
}

} // namespace

TrainedModel train_model(const std::vector<Post>& dataset, const LoadedEncoder& base,
                         const PipelineAssets& assets, const TrainConfig& config,
                         std::vector<double>* epoch_losses) {
    if (dataset.empty()) throw DataError("training dataset is empty");
    if (config.epochs <= 0 || config.batch_size <= 0)
        throw DataError("epochs and batch size must be positive");
    require_assets(config.variant, assets);

    DescEmbeddingTable desc_table;
    if (variant_uses_sources(config.variant)) {
        desc_table = precompute_description_embeddings(*assets.descriptions, base,
                                                       assets.source_config
                                                           .encode_missing_description);
    }

    std::vector<FrozenPost> frozen;
    frozen.reserve(dataset.size());
    for (const Post& post : dataset) {
        if (post.label != Label::Fake && post.label != Label::Real)
            throw DataError("post '" + post.id + "' has no training label");
        frozen.push_back(freeze_post(post, base, assets, config.variant, desc_table));
    }

    // Single generator drives everything in a fixed draw order: fusion init,
    // then per-epoch shuffles interleaved with per-sample dropout.
    Rng rng(config.seed);
    TrainedModel model{config.variant,
                       config.seed,
                       config.epochs,
                       config.batch_size,
                       config.learning_rate,
                       config.train_encoder,
                       dataset_hash(dataset),
                       train_config_digest(config),
                       base.lock,
                       LoadedEncoder{base.tokenizer, base.encoder, base.lock},
                       FusionLayer(variant_dim(config.variant), rng),
                       std::move(desc_table),
                       assets.source_config};

    StepGrads grads{model.enc.encoder.zero_grads(), Mat::Zero(variant_dim(config.variant), 2),
                    Eigen::Vector2d::Zero()};
    auto grad_blocks = param_blocks(grads.enc);
    grad_blocks.emplace_back(grads.fusion_w.data(), static_cast<size_t>(grads.fusion_w.size()));
    grad_blocks.emplace_back(grads.fusion_b.data(), 2);

    auto model_blocks = param_blocks(model.enc.encoder.params());
    for (auto [ptr, len] : model.fusion.param_blocks()) model_blocks.emplace_back(ptr, len);

    // Frozen-encoder training touches only the fusion blocks.
    const size_t fusion_block_start = model_blocks.size() - 2;
    std::vector<std::pair<double*, size_t>> fusion_params(model_blocks.begin() +
                                                              static_cast<long>(fusion_block_start),
                                                          model_blocks.end());
    std::vector<std::pair<double*, size_t>> fusion_grads(grad_blocks.begin() +
                                                             static_cast<long>(fusion_block_start),
                                                         grad_blocks.end());

    AdamConfig adam_config;
    adam_config.lr = config.learning_rate;
    Adam adam(adam_config,
              config.train_encoder ? total_param_count(model_blocks)
                                   : total_param_count(fusion_params));

    // With a frozen encoder every feature is static; compute them once.
    std::vector<Vec> static_features;
    if (!config.train_encoder) {
        static_features.reserve(frozen.size());
        for (const FrozenPost& post : frozen) {
            const Vec p = model.enc.encoder.encode(post.seq);
            std::optional<double> r;
            if (variant_uses_relatedness(config.variant)) {
                std::vector<Vec> doc_encodings;
                doc_encodings.reserve(post.doc_seqs.size());
                for (const auto& seq : post.doc_seqs)
                    doc_encodings.push_back(model.enc.encoder.encode(seq));
                r = relatedness(mean_of(doc_encodings), p);
            }
            static_features.push_back(assemble_features(
                config.variant,
                variant_uses_content(config.variant) ? std::optional<Vec>(p) : std::nullopt, r,
                post.sources));
        }
    }

    std::vector<size_t> order(frozen.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t in_batch = 0;
        auto flush_batch = [&]() {
            if (!in_batch) return;
            if (in_batch > 1) {
                auto& blocks = config.train_encoder ? grad_blocks : fusion_grads;
                scale_blocks(blocks, 1.0 / static_cast<double>(in_batch));
            }
            if (config.train_encoder) {
                adam.step(model_blocks, grad_blocks);
                zero_blocks(grad_blocks);
            } else {
                adam.step(fusion_params, fusion_grads);
                zero_blocks(fusion_grads);
            }
            in_batch = 0;
        };

        for (size_t step = 0; step < order.size(); ++step) {
            const FrozenPost& post = frozen[order[step]];
            double loss;
            if (config.train_encoder) {
                loss = train_step(post, model.enc.encoder, model.fusion, config.variant, &rng,
                                  grads);
            } else {
                const Vec& features = static_features[order[step]];
                const Eigen::Vector2d probs = softmax2(model.fusion.logits(features));
                loss = cross_entropy(probs, post.label);
                model.fusion.backward(features, cross_entropy_dlogits(probs, post.label),
                                      grads.fusion_w, grads.fusion_b);
            }
            check_finite(loss, post, epoch, step);
            epoch_loss += loss;
            if (++in_batch == static_cast<size_t>(config.batch_size)) flush_batch();
        }
        flush_batch();
        if (epoch_losses) epoch_losses->push_back(epoch_loss / static_cast<double>(order.size()));
    }

    // The fine-tuned weights are a new checkpoint revision.
    model.enc.lock.name = base.lock.name;
    model.enc.lock.revision.clear();
    return model;
}

namespace {

Vec features_for(const TrainedModel& model, const Post& post, const PipelineAssets& assets) {
    const PreprocessedPost pre = preprocess(post);
    const Vec p = model.enc.encode_text(pre.normalized_text);
    std::optional<double> r;
    if (variant_uses_relatedness(model.variant)) {
        const RetrievalResult result = assets.index->search(pre.normalized_text);
        const Vec fn = prior_knowledge_vector(result, [&](const std::string& title,
                                                          const std::string& article) {
            return encode_document(model.enc.encoder, model.enc.tokenizer, title, article);
        });
        r = relatedness(fn, p);
    }
    std::optional<Vec> s;
    if (variant_uses_sources(model.variant)) {
        s = source_feature(pre, *assets.unshortener, *assets.reliability, *assets.descriptions,
                           table_encoder(&model.desc_embeddings, &model.enc),
                           model.source_config);
    }
    return assemble_features(model.variant,
                             variant_uses_content(model.variant) ? std::optional<Vec>(p)
                                                                 : std::nullopt,
                             r, s);
}

} // namespace

std::vector<Prediction> predict(const TrainedModel& model, const std::vector<Post>& posts,
                                const PipelineAssets& assets) {
    require_assets(model.variant, assets);
    std::vector<Prediction> preds;
    preds.reserve(posts.size());
    for (const Post& post : posts) {
        preds.push_back(classify(model.fusion, post.id, features_for(model, post, assets)));
    }
    return preds;
}

std::vector<Prediction> predict_ensemble(const std::vector<const TrainedModel*>& models,
                                         const std::vector<Post>& posts,
                                         const PipelineAssets& assets) {
    if (models.empty()) throw DataError("ensemble requires at least one model");
    for (const TrainedModel* m : models) {
        if (m->variant != models.front()->variant)
            throw DataError("ensemble members must share one variant (found " +
                            variant_to_string(models.front()->variant) + " and " +
                            variant_to_string(m->variant) + ")");
    }
    std::vector<std::vector<Prediction>> member_preds;
    member_preds.reserve(models.size());
    for (const TrainedModel* m : models) member_preds.push_back(predict(*m, posts, assets));

    std::vector<Prediction> out;
    out.reserve(posts.size());
    for (size_t i = 0; i < posts.size(); ++i) {
        std::vector<Eigen::Vector2d> probs;
        probs.reserve(models.size());
        for (const auto& preds : member_preds)
            probs.emplace_back(preds[i].prob_fake, preds[i].prob_real);
        out.push_back(average_predictions(posts[i].id, probs));
    }
    return out;
}

// --- Model directory I/O ---------------------------------------------------

namespace {

constexpr const char* kModelFormat = "ecol-model-1";
constexpr const char* kDescMagic = "ECOLD001";

void save_desc_table(const std::filesystem::path& file, const DescEmbeddingTable& table) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write description embeddings: " + file.string());
    out.write(kDescMagic, 8);
    const int64_t count = static_cast<int64_t>(table.size());
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const auto& [text, vec] : table) {
        const int64_t len = static_cast<int64_t>(text.size());
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(text.data(), len);
        const int64_t dim = vec.size();
        out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
        out.write(reinterpret_cast<const char*>(vec.data()),
                  static_cast<std::streamsize>(sizeof(double)) * dim);
    }
}

DescEmbeddingTable load_desc_table(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open description embeddings: " + file.string());
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::string(magic, 8) != kDescMagic)
        throw DataError("bad description embedding header: " + file.string());
    int64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (count < 0 || count > (1 << 24)) throw DataError("corrupt description embedding count");
    DescEmbeddingTable table;
    for (int64_t i = 0; i < count; ++i) {
        int64_t len = 0;
        in.read(reinterpret_cast<char*>(&len), sizeof(len));
        if (len < 0 || len > (1 << 26)) throw DataError("corrupt description length");
        std::string text(static_cast<size_t>(len), '\0');
        in.read(text.data(), len);
        int64_t dim = 0;
        in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
        if (dim < 0 || dim > (1 << 20)) throw DataError("corrupt description embedding size");
        Vec vec(dim);
        in.read(reinterpret_cast<char*>(vec.data()),
                static_cast<std::streamsize>(sizeof(double)) * dim);
        if (!in) throw DataError("description embeddings truncated: " + file.string());
        table.emplace(std::move(text), std::move(vec));
    }
    return table;
}

} // namespace

void TrainedModel::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    fusion.save(dir / "fusion.bin");
    save_checkpoint(dir / "encoder", enc.lock.name, enc.encoder, enc.tokenizer);
    if (variant_uses_sources(variant)) {
        save_desc_table(dir / "desc_embeddings.bin", desc_embeddings);
    }
    nlohmann::json j{{"format", kModelFormat},
                     {"variant", variant_to_string(variant)},
                     {"feature_dim", variant_dim(variant)},
                     {"seed", seed},
                     {"epochs", epochs},
                     {"batch_size", batch_size},
                     {"learning_rate", learning_rate},
                     {"encoder_trained", encoder_trained},
                     {"dataset_digest", dataset_digest},
                     {"config_digest", config_digest},
                     {"base_encoder", {{"name", base_lock.name}, {"revision", base_lock.revision}}},
                     {"encode_missing_description", source_config.encode_missing_description}};
    std::ofstream out(dir / "model.json", std::ios::binary);
    if (!out) throw DataError("cannot write model manifest in " + dir.string());
    out << j.dump(2) << '\n';
}

TrainedModel TrainedModel::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "model.json", std::ios::binary);
    if (!in) throw DataError("cannot open model manifest in " + dir.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("format") || j["format"] != kModelFormat)
        throw DataError("unrecognized model manifest in " + dir.string());

    SourceFeatureConfig source_config;
    source_config.encode_missing_description = j.value("encode_missing_description", false);
    const FeatureVariant variant = variant_from_string(j.at("variant").get<std::string>());

    TrainedModel model{variant,
                       j.at("seed").get<uint64_t>(),
                       j.at("epochs").get<int>(),
                       j.at("batch_size").get<int>(),
                       j.at("learning_rate").get<double>(),
                       j.at("encoder_trained").get<bool>(),
                       j.at("dataset_digest").get<std::string>(),
                       j.at("config_digest").get<std::string>(),
                       EncoderLock{j.at("base_encoder").at("name").get<std::string>(),
                                   j.at("base_encoder").at("revision").get<std::string>()},
                       load_checkpoint(dir / "encoder"),
                       FusionLayer::load(dir / "fusion.bin"),
                       {},
                       source_config};
    if (variant_uses_sources(variant)) {
        model.desc_embeddings = load_desc_table(dir / "desc_embeddings.bin");
    }
    if (model.fusion.in_dim() != variant_dim(variant))
        throw DataError("fusion dimension does not match variant " + variant_to_string(variant));
    return model;
}

} // namespace ecol
