#pragma once

#include <string>
#include <vector>

namespace ecol {

enum class Label { Fake, Real, Unknown };
enum class SplitSource { Train, Dev, Test, Adhoc };

std::string label_to_string(Label label);
Label label_from_string(const std::string& s);

// One social-media message, possibly labeled.
struct Post {
    std::string id;
    std::string raw_text;
    Label label = Label::Unknown;
    SplitSource source = SplitSource::Adhoc;
};

struct PreprocessedPost {
    std::string post_id;
    std::string normalized_text;
    std::vector<std::string> urls; // pre-replacement originals, in-text order
};

// Lowercases, repairs unicode, transliterates to ASCII and replaces URLs,
// emails, phone numbers, currency symbols, numbers and single digits with
// the tags <URL>, <EMAIL>, <PHONE>, <CUR>, <NUMBER>, <DIGIT>. Idempotent.
std::string normalize_text(const std::string& raw);

// Returns every http/https URL in textual order; duplicates retained.
// Works on the raw text so shorteners keep their exact casing and path.
std::vector<std::string> extract_urls(const std::string& raw);

PreprocessedPost preprocess(const Post& post);

} // namespace ecol
