#include "ecol/cli.hpp"

#include "ecol/data.hpp"
#include "ecol/errors.hpp"
#include "ecol/metrics.hpp"
#include "ecol/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ecol {
namespace {

namespace fs = std::filesystem;

constexpr const char* kCacheEnv = "ECOL_CACHE_DIR";

std::vector<uint64_t> parse_seeds(const std::string& spec) {
    std::vector<uint64_t> seeds;
    std::string token;
    std::istringstream in(spec);
    while (std::getline(in, token, ',')) {
        if (token.empty()) continue;
        size_t used = 0;
        unsigned long long value = 0;
        try {
            value = std::stoull(token, &used);
        } catch (const std::exception&) {
            throw DataError("invalid seed '" + token + "'");
        }
        if (used != token.size()) throw DataError("invalid seed '" + token + "'");
        seeds.push_back(value);
    }
    if (seeds.empty()) throw DataError("no seeds given");
    return seeds;
}

// Config-file overlay: JSON object whose keys mirror the long flag names.
// A key present in the file wins over the command line, with a warning.
class ConfigOverlay {
public:
    ConfigOverlay(const std::string& path, std::ostream& err) : err_(err) {
        if (path.empty()) return;
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open config file: " + path);
        json_ = nlohmann::json::parse(in, nullptr, false);
        if (json_.is_discarded() || !json_.is_object())
            throw DataError("config file is not a JSON object: " + path);
    }

    template <typename T>
    void apply(const char* key, T& value, const CLI::Option* opt) {
        seen_.insert(key);
        if (!json_.is_object() || !json_.contains(key)) return;
        T file_value;
        try {
            file_value = json_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw DataError(std::string("config key '") + key + "' has the wrong type");
        }
        if (opt != nullptr && opt->count() > 0 && file_value != value) {
            err_ << "warning: config file value for '" << key
                 << "' overrides the command-line flag\n";
        }
        value = file_value;
    }

    // Rejects keys that no flag of the running command consumed.
    void finish() const {
        if (!json_.is_object()) return;
        for (const auto& item : json_.items()) {
            if (!seen_.count(item.key()))
                throw DataError("unknown config key '" + item.key() + "'");
        }
    }

private:
    nlohmann::json json_;
    std::ostream& err_;
    std::set<std::string> seen_;
};

// ---- assets ---------------------------------------------------------------

struct AssetOptions {
    std::string index_dir;
    std::string reliability_path;
    std::string descriptions_path;
    std::string cache_path;
    bool online = false;
    bool encode_missing_description = false;
};

void add_asset_flags(CLI::App* cmd, AssetOptions& opts) {
    cmd->add_option("--index", opts.index_dir, "Fact-check search index directory");
    cmd->add_option("--reliability", opts.reliability_path, "Source reliability CSV");
    cmd->add_option("--descriptions", opts.descriptions_path, "Entity description JSON-lines");
    cmd->add_option("--cache", opts.cache_path,
                    "URL resolution cache file (default: $" + std::string(kCacheEnv) +
                        "/unshorten_cache.jsonl)");
    cmd->add_flag("--online,!--offline", opts.online,
                  "Allow network URL resolution (default: offline, cache only)");
    cmd->add_flag("--encode-missing-description", opts.encode_missing_description,
                  "Embed the empty string for unknown sources instead of a zero block");
}

void apply_asset_config(ConfigOverlay& config, CLI::App* cmd, AssetOptions& opts) {
    config.apply("index", opts.index_dir, cmd->get_option("--index"));
    config.apply("reliability", opts.reliability_path, cmd->get_option("--reliability"));
    config.apply("descriptions", opts.descriptions_path, cmd->get_option("--descriptions"));
    config.apply("cache", opts.cache_path, cmd->get_option("--cache"));
    config.apply("online", opts.online, cmd->get_option("--online"));
    config.apply("encode-missing-description", opts.encode_missing_description,
                 cmd->get_option("--encode-missing-description"));
}

fs::path resolve_cache_path(const std::string& explicit_path) {
    if (!explicit_path.empty()) return explicit_path;
    if (const char* root = std::getenv(kCacheEnv); root != nullptr && *root != '\0') {
        fs::create_directories(root);
        return fs::path(root) / "unshorten_cache.jsonl";
    }
    return {}; // in-memory cache only
}

// Owns the assets a variant needs; `view()` hands the pipeline raw pointers.
struct Assets {
    std::optional<SearchIndex> index;
    std::optional<Unshortener> unshortener;
    std::optional<ReliabilityMap> reliability;
    std::optional<DescriptionMap> descriptions;
    SourceFeatureConfig source_config;

    PipelineAssets view() {
        PipelineAssets a;
        if (index) a.index = &*index;
        if (unshortener) a.unshortener = &*unshortener;
        if (reliability) a.reliability = &*reliability;
        if (descriptions) a.descriptions = &*descriptions;
        a.source_config = source_config;
        return a;
    }

    void flush() {
        if (unshortener) unshortener->flush();
    }
};

// Fills in place: Assets is pinned in memory (the resolver owns a mutex).
void load_assets(FeatureVariant variant, const AssetOptions& opts, std::ostream& err,
                 Assets& assets) {
    if (variant_uses_relatedness(variant)) {
        if (opts.index_dir.empty())
            throw DataError("variant " + variant_to_string(variant) + " needs --index");
        assets.index = SearchIndex::load(opts.index_dir);
    }
    if (variant_uses_sources(variant)) {
        if (opts.reliability_path.empty())
            throw DataError("variant " + variant_to_string(variant) + " needs --reliability");
        if (opts.descriptions_path.empty())
            throw DataError("variant " + variant_to_string(variant) + " needs --descriptions");
        assets.reliability = ReliabilityMap::from_csv(opts.reliability_path);
        size_t skipped = 0;
        assets.descriptions = DescriptionMap::build(opts.descriptions_path, &skipped);
        if (skipped > 0)
            err << "warning: skipped " << skipped << " malformed description record(s)\n";
        UnshortenerConfig uc;
        uc.offline = !opts.online;
        uc.cache_file = resolve_cache_path(opts.cache_path);
        assets.unshortener.emplace(uc);
        assets.source_config.encode_missing_description = opts.encode_missing_description;
    }
}

// ---- commands ---------------------------------------------------------------

void cmd_preprocess(const std::string& in_path, const std::string& out_path, std::ostream& out) {
    write_preprocessed(in_path, out_path);
    out << "wrote " << out_path << "\n";
}

void cmd_build_index(const std::string& corpus_path, const std::string& index_dir,
                     std::ostream& out, std::ostream& err) {
    size_t skipped = 0;
    const auto corpus = load_fact_check_corpus(corpus_path, &skipped);
    if (skipped > 0) err << "warning: skipped " << skipped << " malformed corpus record(s)\n";
    const SearchIndex index = SearchIndex::build(corpus);
    index.save(index_dir);
    out << "indexed " << index.size() << " documents\n";
}

struct TrainOptions {
    std::string data_path;
    std::string encoder_dir;
    std::string out_dir;
    std::string variant_name = "C";
    std::string seeds = "42";
    int epochs = 3;
    int batch_size = 1;
    double learning_rate = 2e-5;
    bool freeze_encoder = false;
    AssetOptions assets;
};

void cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err) {
    const FeatureVariant variant = variant_from_string(opts.variant_name);
    const std::vector<uint64_t> seeds = parse_seeds(opts.seeds);

    const DatasetSplit dataset = load_constraint(opts.data_path);
    const LoadedEncoder base = load_checkpoint(opts.encoder_dir);
    Assets assets;
    load_assets(variant, opts.assets, err, assets);
    const PipelineAssets view = assets.view();

    for (const uint64_t seed : seeds) {
        TrainConfig config;
        config.variant = variant;
        config.seed = seed;
        config.epochs = opts.epochs;
        config.batch_size = opts.batch_size;
        config.learning_rate = opts.learning_rate;
        config.train_encoder = !opts.freeze_encoder;

        std::vector<double> losses;
        const TrainedModel model = train_model(dataset.posts, base, view, config, &losses);
        const fs::path model_dir = fs::path(opts.out_dir) / ("seed-" + std::to_string(seed));
        model.save(model_dir);

        out << "seed " << seed << ": epoch losses";
        for (const double loss : losses) {
            char buf[32];
            std::snprintf(buf, sizeof buf, " %.6f", loss);
            out << buf;
        }
        out << "; saved " << model_dir.string() << "\n";
    }
    out << "trained " << seeds.size() << " model(s), variant " << variant_to_string(variant)
        << ", feature dim " << variant_dim(variant) << "\n";
    assets.flush();
}

// Loads the model directories, checks they agree on one variant and returns
// predictions (single model plain, several averaged).
std::vector<Prediction> run_models(const std::vector<std::string>& model_dirs,
                                   const std::vector<Post>& posts, const AssetOptions& asset_opts,
                                   std::ostream& err, Assets& assets_out) {
    std::vector<TrainedModel> models;
    models.reserve(model_dirs.size());
    for (const std::string& dir : model_dirs) models.push_back(TrainedModel::load(dir));
    for (size_t i = 1; i < models.size(); ++i) {
        if (models[i].variant != models[0].variant) {
            throw DataError("models disagree on variant: " +
                            variant_to_string(models[0].variant) + " vs " +
                            variant_to_string(models[i].variant));
        }
    }
    load_assets(models[0].variant, asset_opts, err, assets_out);
    const PipelineAssets view = assets_out.view();
    if (models.size() == 1) return predict(models[0], posts, view);
    std::vector<const TrainedModel*> member_ptrs;
    member_ptrs.reserve(models.size());
    for (const TrainedModel& m : models) member_ptrs.push_back(&m);
    return predict_ensemble(member_ptrs, posts, view);
}

void cmd_predict(const std::vector<std::string>& model_dirs, const std::string& data_path,
                 const std::string& out_path, const AssetOptions& asset_opts, std::ostream& out,
                 std::ostream& err) {
    const DatasetSplit dataset = load_constraint(data_path);
    Assets assets;
    const auto preds = run_models(model_dirs, dataset.posts, asset_opts, err, assets);
    write_predictions(out_path, preds);
    out << "wrote " << preds.size() << " prediction(s) to " << out_path << "\n";
    assets.flush();
}

void cmd_evaluate(const std::vector<std::string>& model_dirs, const std::string& data_path,
                  const std::string& report_path, const AssetOptions& asset_opts,
                  std::ostream& out, std::ostream& err) {
    const DatasetSplit dataset = load_constraint(data_path);
    Assets assets;
    const auto preds = run_models(model_dirs, dataset.posts, asset_opts, err, assets);
    err << (model_dirs.size() == 1
                ? "evaluating 1 model\n"
                : "evaluating the mean-probability ensemble of " +
                      std::to_string(model_dirs.size()) + " models\n");

    const MetricsReport report = compute_metrics(preds, dataset.posts);
    const LinkBreakdown breakdown = link_breakdown(preds, dataset.posts);
    const std::string json = metrics_to_json(report, breakdown);
    out << json << "\n";
    if (!report_path.empty()) {
        std::ofstream file(report_path, std::ios::binary);
        if (!file) throw DataError("cannot write report: " + report_path);
        file << json << "\n";
    }
    assets.flush();
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Early fake-news detection: content, prior knowledge and source features"};
    app.require_subcommand(1);

    // preprocess ------------------------------------------------------------
    auto* pre = app.add_subcommand("preprocess", "Normalize a dataset and extract its URLs");
    std::string pre_in, pre_out, pre_config;
    pre->add_option("--data", pre_in, "Input dataset (id,tweet,label)")->required();
    pre->add_option("--out", pre_out, "Output file")->required();
    pre->add_option("--config", pre_config, "JSON config file (overrides flags)");

    // build-index -----------------------------------------------------------
    auto* build = app.add_subcommand("build-index", "Index a fact-check corpus for retrieval");
    std::string build_corpus, build_out, build_config;
    build->add_option("--corpus", build_corpus, "Corpus JSON-lines file")->required();
    build->add_option("--out", build_out, "Index directory")->required();
    build->add_option("--config", build_config, "JSON config file (overrides flags)");

    // train -------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Train one model per seed");
    TrainOptions topts;
    std::string train_config;
    train->add_option("--data", topts.data_path, "Training dataset")->required();
    train->add_option("--encoder", topts.encoder_dir, "Starting encoder checkpoint directory")
        ->required();
    train->add_option("--out", topts.out_dir, "Directory receiving one model per seed")
        ->required();
    train->add_option("--variant", topts.variant_name, "Feature variant: C, PK, C_PK, C_S, C_PK_S");
    train->add_option("--seeds", topts.seeds, "Comma-separated seed list (default 42)");
    train->add_option("--epochs", topts.epochs, "Training epochs");
    train->add_option("--batch-size", topts.batch_size, "Posts per optimizer step");
    train->add_option("--learning-rate", topts.learning_rate, "Optimizer step size");
    train->add_flag("--freeze-encoder", topts.freeze_encoder,
                    "Train only the fusion layer over frozen features");
    add_asset_flags(train, topts.assets);
    train->add_option("--config", train_config, "JSON config file (overrides flags)");

    // predict -----------------------------------------------------------
    auto* predict_cmd = app.add_subcommand("predict", "Write per-post probabilities");
    std::vector<std::string> predict_models;
    std::string predict_data, predict_out, predict_config;
    AssetOptions predict_assets;
    predict_cmd->add_option("--model", predict_models, "Model directory (repeat to ensemble)")
        ->required();
    predict_cmd->add_option("--data", predict_data, "Dataset to score")->required();
    predict_cmd->add_option("--out", predict_out, "Prediction CSV path")->required();
    add_asset_flags(predict_cmd, predict_assets);
    predict_cmd->add_option("--config", predict_config, "JSON config file (overrides flags)");

    // evaluate ----------------------------------------------------------
    auto* eval = app.add_subcommand("evaluate", "Score a dataset and print the metrics report");
    std::vector<std::string> eval_models;
    std::string eval_data, eval_report, eval_config;
    AssetOptions eval_assets;
    eval->add_option("--model", eval_models, "Model directory (repeat to ensemble)")->required();
    eval->add_option("--data", eval_data, "Labeled dataset to evaluate")->required();
    eval->add_option("--report", eval_report, "Also write the JSON report to this file");
    add_asset_flags(eval, eval_assets);
    eval->add_option("--config", eval_config, "JSON config file (overrides flags)");

    try {
        app.parse(argc, argv);

        if (pre->parsed()) {
            ConfigOverlay config(pre_config, err);
            config.apply("data", pre_in, pre->get_option("--data"));
            config.apply("out", pre_out, pre->get_option("--out"));
            config.finish();
            cmd_preprocess(pre_in, pre_out, out);
        } else if (build->parsed()) {
            ConfigOverlay config(build_config, err);
            config.apply("corpus", build_corpus, build->get_option("--corpus"));
            config.apply("out", build_out, build->get_option("--out"));
            config.finish();
            cmd_build_index(build_corpus, build_out, out, err);
        } else if (train->parsed()) {
            ConfigOverlay config(train_config, err);
            config.apply("data", topts.data_path, train->get_option("--data"));
            config.apply("encoder", topts.encoder_dir, train->get_option("--encoder"));
            config.apply("out", topts.out_dir, train->get_option("--out"));
            config.apply("variant", topts.variant_name, train->get_option("--variant"));
            config.apply("seeds", topts.seeds, train->get_option("--seeds"));
            config.apply("epochs", topts.epochs, train->get_option("--epochs"));
            config.apply("batch-size", topts.batch_size, train->get_option("--batch-size"));
            config.apply("learning-rate", topts.learning_rate,
                         train->get_option("--learning-rate"));
            config.apply("freeze-encoder", topts.freeze_encoder,
                         train->get_option("--freeze-encoder"));
            apply_asset_config(config, train, topts.assets);
            config.finish();
            cmd_train(topts, out, err);
        } else if (predict_cmd->parsed()) {
            ConfigOverlay config(predict_config, err);
            config.apply("model", predict_models, predict_cmd->get_option("--model"));
            config.apply("data", predict_data, predict_cmd->get_option("--data"));
            config.apply("out", predict_out, predict_cmd->get_option("--out"));
            apply_asset_config(config, predict_cmd, predict_assets);
            config.finish();
            cmd_predict(predict_models, predict_data, predict_out, predict_assets, out, err);
        } else if (eval->parsed()) {
            ConfigOverlay config(eval_config, err);
            config.apply("model", eval_models, eval->get_option("--model"));
            config.apply("data", eval_data, eval->get_option("--data"));
            config.apply("report", eval_report, eval->get_option("--report"));
            apply_asset_config(config, eval, eval_assets);
            config.finish();
            cmd_evaluate(eval_models, eval_data, eval_report, eval_assets, out, err);
        }
        return 0;
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace ecol
