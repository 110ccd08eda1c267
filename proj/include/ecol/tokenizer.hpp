#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace ecol {

constexpr int kMaxSeqLen = 128;

// Fixed-width token window: exactly 128 positions, classification token
// first, padding positions carry mask 0.
struct TokenSequence {
    std::vector<int> ids;     // size kMaxSeqLen
    std::vector<int> mask;    // size kMaxSeqLen, 0/1

    int attended() const {
        int n = 0;
        for (int m : mask) n += m;
        return n;
    }
};

// Greedy longest-match wordpiece tokenizer over a fixed vocabulary file
// (one token per line). Continuation pieces carry a "##" prefix. Substitution
// tags like <URL> are atomic tokens. Single-character pieces guarantee any
// ASCII text tokenizes without [UNK] when the vocabulary includes them.
class WordPieceTokenizer {
public:
    static constexpr const char* kPad = "[PAD]";
    static constexpr const char* kUnk = "[UNK]";
    static constexpr const char* kCls = "[CLS]";
    static constexpr const char* kSep = "[SEP]";

    explicit WordPieceTokenizer(std::vector<std::string> vocab);
    static WordPieceTokenizer from_vocab_file(const std::filesystem::path& path);
    void save_vocab(const std::filesystem::path& path) const;

    // Deterministic; truncates to 126 content pieces so [SEP] always fits.
    TokenSequence encode(const std::string& text) const;

    // Wordpiece split of one text without special tokens or padding.
    std::vector<int> pieces(const std::string& text) const;

    int vocab_size() const { return static_cast<int>(vocab_.size()); }
    const std::vector<std::string>& vocab() const { return vocab_; }
    int pad_id() const { return pad_id_; }
    int unk_id() const { return unk_id_; }
    int cls_id() const { return cls_id_; }
    int sep_id() const { return sep_id_; }

private:
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int> lookup_;
    int pad_id_ = -1, unk_id_ = -1, cls_id_ = -1, sep_id_ = -1;
    size_t max_piece_len_ = 1;
};

} // namespace ecol
