#pragma once

#include "ecol/model.hpp"
#include "ecol/preprocess.hpp"
#include "ecol/retrieval.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ecol {

struct DatasetSplit {
    SplitSource source = SplitSource::Adhoc;
    std::vector<Post> posts;
};

// Delimiter-separated social-media split with header id,tweet,label.
// The delimiter (comma or tab) is sniffed from the header row; quoted fields
// may contain delimiters, quotes and newlines. Unknown labels and duplicate
// ids are reported with their row number.
DatasetSplit load_constraint(const std::filesystem::path& path,
                             SplitSource source = SplitSource::Adhoc);

// Writes a split back out with normalized_text and urls (JSON array) columns
// appended, preserving row order and the input delimiter.
void write_preprocessed(const std::filesystem::path& in_path,
                        const std::filesystem::path& out_path);

// JSON-lines corpus with keys doc_id, title, article, verdict, date.
// Records missing a field are skipped and counted, not fatal.
std::vector<FactCheckDoc> load_fact_check_corpus(const std::filesystem::path& path,
                                                 size_t* skipped = nullptr);

// Prediction CSV: header post_id,prob_fake,prob_real,label. Probabilities
// round-trip exactly (17 significant digits).
void write_predictions(const std::filesystem::path& path, const std::vector<Prediction>& preds);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

// Stable digest of a labeled dataset for training manifests.
std::string dataset_hash(const std::vector<Post>& posts);

// Low-level delimited reader shared by the loaders (RFC-4180 quoting).
std::vector<std::vector<std::string>> read_delimited(const std::filesystem::path& path,
                                                     char delimiter);
char sniff_delimiter(const std::filesystem::path& path);

} // namespace ecol
