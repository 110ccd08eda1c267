#include "ecol/data.hpp"

#include "ecol/errors.hpp"
#include "ecol/hash.hpp"

#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace ecol {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Parses one RFC-4180 record starting at pos. Returns false at end of input.
bool parse_record(const std::string& text, size_t& pos, char delim,
                  std::vector<std::string>& fields) {
    fields.clear();
    if (pos >= text.size()) return false;
    std::string field;
    bool quoted = false;
    while (pos < text.size()) {
        char c = text[pos];
        if (quoted) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    field.push_back('"');
                    pos += 2;
                } else {
                    quoted = false;
                    ++pos;
                }
            } else {
                field.push_back(c);
                ++pos;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
            ++pos;
        } else if (c == delim) {
            fields.push_back(std::move(field));
            field.clear();
            ++pos;
        } else if (c == '\n' || c == '\r') {
            ++pos;
            if (c == '\r' && pos < text.size() && text[pos] == '\n') ++pos;
            fields.push_back(std::move(field));
            return true;
        } else {
            field.push_back(c);
            ++pos;
        }
    }
    fields.push_back(std::move(field));
    return true;
}

std::string strip_bom(std::string s) {
    if (s.size() >= 3 && s[0] == '\xef' && s[1] == '\xbb' && s[2] == '\xbf') s.erase(0, 3);
    return s;
}

std::string lower(std::string s) {
    for (char& c : s)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
}

// Non-throwing label parse so callers can attach row/line context.
Label parse_label(const std::string& s) {
    if (s == "fake") return Label::Fake;
    if (s == "real") return Label::Real;
    return Label::Unknown;
}

bool needs_quoting(const std::string& field, char delim) {
    return field.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string::npos;
}

void write_field(std::ostream& out, const std::string& field, char delim) {
    if (!needs_quoting(field, delim)) {
        out << field;
        return;
    }
    out << '"';
    for (char c : field) {
        if (c == '"') out << "\"\"";
        else out << c;
    }
    out << '"';
}

} // namespace

char sniff_delimiter(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string header;
    std::getline(in, header);
    return header.find('\t') != std::string::npos ? '\t' : ',';
}

std::vector<std::vector<std::string>> read_delimited(const std::filesystem::path& path,
                                                     char delimiter) {
    const std::string text = strip_bom(read_file(path));
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> fields;
    size_t pos = 0;
    while (parse_record(text, pos, delimiter, fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue; // blank line
        rows.push_back(fields);
    }
    return rows;
}

namespace {

// Maps header names to column indices; throws naming the first missing column.
std::unordered_map<std::string, size_t> index_header(const std::vector<std::string>& header,
                                                     const std::vector<std::string>& required,
                                                     const std::filesystem::path& path) {
    std::unordered_map<std::string, size_t> cols;
    for (size_t i = 0; i < header.size(); ++i) cols[lower(header[i])] = i;
    for (const auto& name : required) {
        if (!cols.count(name))
            throw DataError(path.string() + ": missing column '" + name + "'");
    }
    return cols;
}

} // namespace

DatasetSplit load_constraint(const std::filesystem::path& path, SplitSource source) {
    const char delim = sniff_delimiter(path);
    const auto rows = read_delimited(path, delim);
    if (rows.empty()) throw DataError(path.string() + ": missing header row");
    const auto cols = index_header(rows[0], {"id", "tweet", "label"}, path);
    const size_t id_col = cols.at("id"), tweet_col = cols.at("tweet"), label_col = cols.at("label");

    DatasetSplit split;
    split.source = source;
    std::unordered_set<std::string> seen;
    for (size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const size_t row_number = r + 1; // 1-based, counting the header
        if (row.size() <= std::max({id_col, tweet_col, label_col}))
            throw DataError(path.string() + ": row " + std::to_string(row_number) +
                            " has too few fields");
        Post post;
        post.id = row[id_col];
        post.raw_text = row[tweet_col];
        post.source = source;
        const std::string label = lower(row[label_col]);
        post.label = parse_label(label);
        if (post.label == Label::Unknown)
            throw DataError(path.string() + ": row " + std::to_string(row_number) +
                            " has unknown label '" + row[label_col] + "'");
        if (!seen.insert(post.id).second)
            throw DataError(path.string() + ": row " + std::to_string(row_number) +
                            " duplicates id '" + post.id + "'");
        split.posts.push_back(std::move(post));
    }
    return split;
}

void write_preprocessed(const std::filesystem::path& in_path,
                        const std::filesystem::path& out_path) {
    const char delim = sniff_delimiter(in_path);
    const auto rows = read_delimited(in_path, delim);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot open " + out_path.string() + " for writing");
    if (rows.empty()) return;
    const auto cols = index_header(rows[0], {"id", "tweet"}, in_path);
    const size_t tweet_col = cols.at("tweet");

    auto write_row = [&](const std::vector<std::string>& fields) {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) out << delim;
            write_field(out, fields[i], delim);
        }
        out << '\n';
    };

    std::vector<std::string> header = rows[0];
    header.push_back("normalized_text");
    header.push_back("urls");
    write_row(header);

    for (size_t r = 1; r < rows.size(); ++r) {
        std::vector<std::string> row = rows[r];
        if (row.size() <= tweet_col)
            throw DataError(in_path.string() + ": row " + std::to_string(r + 1) +
                            " has too few fields");
        const std::string& raw = row[tweet_col];
        row.push_back(normalize_text(raw));
        nlohmann::json urls = nlohmann::json::array();
        for (const auto& u : extract_urls(raw)) urls.push_back(u);
        row.push_back(urls.dump());
        write_row(row);
    }
}

std::vector<FactCheckDoc> load_fact_check_corpus(const std::filesystem::path& path,
                                                 size_t* skipped) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<FactCheckDoc> docs;
    size_t skip_count = 0;
    std::string line;
    size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw DataError(path.string() + ": line " + std::to_string(line_number) +
                            " is not valid JSON");
        const char* required[] = {"doc_id", "title", "article", "verdict", "date"};
        bool complete = true;
        for (const char* key : required) {
            if (!j.contains(key) || !j[key].is_string()) {
                complete = false;
                break;
            }
        }
        if (!complete) {
            ++skip_count;
            continue;
        }
        FactCheckDoc doc;
        doc.doc_id = j["doc_id"].get<std::string>();
        doc.title = j["title"].get<std::string>();
        doc.article = j["article"].get<std::string>();
        doc.verdict = parse_label(lower(j["verdict"].get<std::string>()));
        doc.published_before = j["date"].get<std::string>();
        if (doc.verdict == Label::Unknown) {
            ++skip_count;
            continue;
        }
        docs.push_back(std::move(doc));
    }
    if (skipped) *skipped = skip_count;
    return docs;
}

void write_predictions(const std::filesystem::path& path, const std::vector<Prediction>& preds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << "post_id,prob_fake,prob_real,label\n";
    char buf[64];
    for (const auto& p : preds) {
        write_field(out, p.post_id, ',');
        std::snprintf(buf, sizeof(buf), "%.17g", p.prob_fake);
        out << ',' << buf;
        std::snprintf(buf, sizeof(buf), "%.17g", p.prob_real);
        out << ',' << buf << ',' << label_to_string(p.label) << '\n';
    }
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
    const auto rows = read_delimited(path, ',');
    if (rows.empty()) throw DataError(path.string() + ": missing header row");
    const auto cols = index_header(rows[0], {"post_id", "prob_fake", "prob_real", "label"}, path);
    std::vector<Prediction> preds;
    for (size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() < 4)
            throw DataError(path.string() + ": row " + std::to_string(r + 1) +
                            " has too few fields");
        Prediction p;
        p.post_id = row[cols.at("post_id")];
        p.prob_fake = std::stod(row[cols.at("prob_fake")]);
        p.prob_real = std::stod(row[cols.at("prob_real")]);
        p.label = parse_label(lower(row[cols.at("label")]));
        if (p.label == Label::Unknown)
            throw DataError(path.string() + ": row " + std::to_string(r + 1) +
                            " has unknown label '" + row[cols.at("label")] + "'");
        preds.push_back(std::move(p));
    }
    return preds;
}

std::string dataset_hash(const std::vector<Post>& posts) {
    uint64_t h = kFnvOffset;
    for (const auto& p : posts) {
        h = fnv1a64(p.id, h);
        h = fnv1a64("\x1f", 1, h);
        h = fnv1a64(p.raw_text, h);
        h = fnv1a64("\x1f", 1, h);
        h = fnv1a64(label_to_string(p.label), h);
        h = fnv1a64("\x1e", 1, h);
    }
    return hash_hex(h);
}

} // namespace ecol
