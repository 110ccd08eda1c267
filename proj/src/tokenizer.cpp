#include "ecol/tokenizer.hpp"

#include "ecol/errors.hpp"

#include <cctype>
#include <fstream>

namespace ecol {

namespace {

const char* kTagLiterals[] = {"<URL>", "<EMAIL>", "<NUMBER>", "<DIGIT>", "<PHONE>", "<CUR>"};

bool is_word_char(unsigned char c) {
    return std::isalnum(c) || c == '\'';
}

// Splits on whitespace, keeps substitution tags atomic and makes every
// punctuation character its own word.
std::vector<std::string> basic_tokenize(const std::string& text) {
    std::vector<std::string> words;
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) { ++i; continue; }
        if (c == '<') {
            bool matched = false;
            for (const char* tag : kTagLiterals) {
                const size_t len = std::char_traits<char>::length(tag);
                if (text.compare(i, len, tag) == 0) {
                    words.emplace_back(tag);
                    i += len;
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
        }
        if (is_word_char(c)) {
            size_t j = i + 1;
            while (j < n && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
            words.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            words.emplace_back(1, text[i]);
            ++i;
        }
    }
    return words;
}

} // namespace

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
    lookup_.reserve(vocab_.size());
    for (size_t i = 0; i < vocab_.size(); ++i) {
        if (!lookup_.emplace(vocab_[i], static_cast<int>(i)).second) {
            throw DataError("duplicate vocabulary entry: '" + vocab_[i] + "'");
        }
        max_piece_len_ = std::max(max_piece_len_, vocab_[i].size());
    }
    const auto find = [&](const char* tok) {
        const auto it = lookup_.find(tok);
        if (it == lookup_.end()) throw DataError(std::string("vocabulary missing ") + tok);
        return it->second;
    };
    pad_id_ = find(kPad);
    unk_id_ = find(kUnk);
    cls_id_ = find(kCls);
    sep_id_ = find(kSep);
}

WordPieceTokenizer WordPieceTokenizer::from_vocab_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary file: " + path.string());
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) vocab.push_back(line);
    }
    return WordPieceTokenizer(std::move(vocab));
}

void WordPieceTokenizer::save_vocab(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write vocabulary file: " + path.string());
    for (const std::string& tok : vocab_) out << tok << '\n';
}

std::vector<int> WordPieceTokenizer::pieces(const std::string& text) const {
    std::vector<int> out;
    for (const std::string& word : basic_tokenize(text)) {
        size_t pos = 0;
        std::vector<int> word_pieces;
        bool failed = false;
        while (pos < word.size()) {
            const std::string prefix = pos == 0 ? "" : "##";
            size_t best_len = 0;
            int best_id = -1;
            const size_t budget = std::min(word.size() - pos, max_piece_len_);
            for (size_t len = budget; len >= 1; --len) {
                const auto it = lookup_.find(prefix + word.substr(pos, len));
                if (it != lookup_.end()) {
                    best_len = len;
                    best_id = it->second;
                    break;
                }
            }
            if (best_id < 0) { failed = true; break; }
            word_pieces.push_back(best_id);
            pos += best_len;
        }
        if (failed) {
            out.push_back(unk_id_);
        } else {
            out.insert(out.end(), word_pieces.begin(), word_pieces.end());
        }
    }
    return out;
}

TokenSequence WordPieceTokenizer::encode(const std::string& text) const {
    std::vector<int> content = pieces(text);
    const size_t max_content = kMaxSeqLen - 2; // room for [CLS] and [SEP]
    if (content.size() > max_content) content.resize(max_content);

    TokenSequence seq;
    seq.ids.assign(kMaxSeqLen, pad_id_);
    seq.mask.assign(kMaxSeqLen, 0);
    seq.ids[0] = cls_id_;
    seq.mask[0] = 1;
    for (size_t i = 0; i < content.size(); ++i) {
        seq.ids[i + 1] = content[i];
        seq.mask[i + 1] = 1;
    }
    seq.ids[content.size() + 1] = sep_id_;
    seq.mask[content.size() + 1] = 1;
    return seq;
}

} // namespace ecol
