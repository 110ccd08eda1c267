#pragma once

#include "ecol/data.hpp"
#include "ecol/encoder.hpp"
#include "ecol/preprocess.hpp"
#include "ecol/retrieval.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ecol {

// Deterministic synthetic stand-ins for the external datasets, shaped to the
// published split statistics so ingestion and harness checks run offline.
// Class-discriminative wording is flipped for a small calibrated fraction of
// posts to hold the lexical baselines near their published scores.

// Exact sizes and link-presence cells per split:
//   train 6420 (real 2321 w / 1039 w/o; fake 1002 w / 2058 w/o)
//   dev   2140 (real  780 w /  340 w/o; fake  327 w /  693 w/o)
//   test  2140 (real  779 w /  341 w/o; fake  319 w /  701 w/o)
std::vector<Post> synthetic_split(SplitSource which, uint64_t seed = 1337);

// id,tweet,label CSV in the ingestion format.
void write_split_csv(const std::filesystem::path& path, const std::vector<Post>& posts);

// Fifty fake fact-check documents sharing vocabulary with the synthetic fake
// posts, so retrieval has signal.
std::vector<FactCheckDoc> fixture_corpus();
void write_corpus_jsonl(const std::filesystem::path& path,
                        const std::vector<FactCheckDoc>& corpus);

// Reliability tags, entity descriptions and unshortening results covering
// every domain and short link the synthetic splits emit.
void write_reliability_csv(const std::filesystem::path& path);
void write_descriptions_jsonl(const std::filesystem::path& path);
void write_unshorten_cache(const std::filesystem::path& path);

// Vocabulary covering the generator word pools, normalization tags, specials
// and single characters, for the miniature encoder checkpoint.
std::vector<std::string> fixture_vocab();

// Writes a seeded miniature encoder checkpoint (d_model 64, 2 layers).
void write_fixture_checkpoint(const std::filesystem::path& dir, uint64_t seed = 7);

// Writes every fixture into one directory: train.csv/dev.csv/test.csv,
// corpus.jsonl, reliability.csv, descriptions.jsonl, unshorten_cache.jsonl,
// encoder/.
void write_all_fixtures(const std::filesystem::path& dir, uint64_t seed = 1337);

} // namespace ecol
