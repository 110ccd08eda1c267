#include "ecol/preprocess.hpp"

#include "ecol/errors.hpp"

#include <array>
#include <cctype>
#include <cstdint>
#include <unordered_map>

namespace ecol {

std::string label_to_string(Label label) {
    switch (label) {
        case Label::Fake: return "fake";
        case Label::Real: return "real";
        default: return "unknown";
    }
}

Label label_from_string(const std::string& s) {
    if (s == "fake") return Label::Fake;
    if (s == "real") return Label::Real;
    if (s == "unknown" || s.empty()) return Label::Unknown;
    throw DataError("unknown label value: '" + s + "'");
}

namespace {

// Sentinel bytes used internally while substituting. Control bytes are
// stripped during transliteration, so these can never collide with input.
constexpr char kUrlMark = '\x01';
constexpr char kEmailMark = '\x02';
constexpr char kNumberMark = '\x03';
constexpr char kDigitMark = '\x04';
constexpr char kPhoneMark = '\x05';
constexpr char kCurMark = '\x06';
constexpr char kCurPending = '\x07'; // currency symbol awaiting URL/email resolution

const std::array<std::pair<char, const char*>, 6> kTagTable = {{
    {kUrlMark, "<URL>"},
    {kEmailMark, "<EMAIL>"},
    {kNumberMark, "<NUMBER>"},
    {kDigitMark, "<DIGIT>"},
    {kPhoneMark, "<PHONE>"},
    {kCurMark, "<CUR>"},
}};

// --- UTF-8 decoding with latin-1 fallback -------------------------------

std::vector<uint32_t> decode_utf8(const std::string& s) {
    std::vector<uint32_t> out;
    out.reserve(s.size());
    size_t i = 0;
    const size_t n = s.size();
    while (i < n) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        if (b0 < 0x80) {
            out.push_back(b0);
            ++i;
            continue;
        }
        int extra = 0;
        uint32_t cp = 0;
        if ((b0 & 0xE0) == 0xC0) { extra = 1; cp = b0 & 0x1F; }
        else if ((b0 & 0xF0) == 0xE0) { extra = 2; cp = b0 & 0x0F; }
        else if ((b0 & 0xF8) == 0xF0) { extra = 3; cp = b0 & 0x07; }
        else { out.push_back(b0); ++i; continue; } // stray byte: latin-1 fallback
        if (i + extra >= n) { out.push_back(b0); ++i; continue; }
        bool ok = true;
        for (int k = 1; k <= extra; ++k) {
            const auto bk = static_cast<unsigned char>(s[i + k]);
            if ((bk & 0xC0) != 0x80) { ok = false; break; }
            cp = (cp << 6) | (bk & 0x3F);
        }
        if (!ok) { out.push_back(b0); ++i; continue; }
        out.push_back(cp);
        i += 1 + extra;
    }
    return out;
}

// --- Mojibake repair -----------------------------------------------------

// Inverse of "UTF-8 bytes displayed as cp1252/latin-1 text". Returns the
// byte a codepoint would have come from, or -1 if it is not such a glyph.
int cp1252_byte(uint32_t cp) {
    if (cp <= 0xFF) return static_cast<int>(cp);
    switch (cp) {
        case 0x20AC: return 0x80; case 0x201A: return 0x82; case 0x0192: return 0x83;
        case 0x201E: return 0x84; case 0x2026: return 0x85; case 0x2020: return 0x86;
        case 0x2021: return 0x87; case 0x02C6: return 0x88; case 0x2030: return 0x89;
        case 0x0160: return 0x8A; case 0x2039: return 0x8B; case 0x0152: return 0x8C;
        case 0x017D: return 0x8E; case 0x2018: return 0x91; case 0x2019: return 0x92;
        case 0x201C: return 0x93; case 0x201D: return 0x94; case 0x2022: return 0x95;
        case 0x2013: return 0x96; case 0x2014: return 0x97; case 0x02DC: return 0x98;
        case 0x2122: return 0x99; case 0x0161: return 0x9A; case 0x203A: return 0x9B;
        case 0x0153: return 0x9C; case 0x017E: return 0x9E; case 0x0178: return 0x9F;
        default: return -1;
    }
}

// Collapses sequences like "â€™" back into the codepoint they encode.
std::vector<uint32_t> repair_mojibake(const std::vector<uint32_t>& cps) {
    std::vector<uint32_t> out;
    out.reserve(cps.size());
    size_t i = 0;
    while (i < cps.size()) {
        const int b0 = cp1252_byte(cps[i]);
        int extra = 0;
        if (b0 >= 0xC2 && b0 <= 0xDF) extra = 1;
        else if (b0 >= 0xE0 && b0 <= 0xEF) extra = 2;
        else if (b0 >= 0xF0 && b0 <= 0xF4) extra = 3;
        if (extra > 0 && i + extra < cps.size()) {
            bool ok = true;
            uint32_t cp = (extra == 1) ? (b0 & 0x1F) : (extra == 2) ? (b0 & 0x0F) : (b0 & 0x07);
            for (int k = 1; k <= extra; ++k) {
                const int bk = cp1252_byte(cps[i + k]);
                if (bk < 0x80 || bk > 0xBF) { ok = false; break; }
                cp = (cp << 6) | (bk & 0x3F);
            }
            if (ok && cp >= 0x80) {
                out.push_back(cp);
                i += 1 + extra;
                continue;
            }
        }
        out.push_back(cps[i]);
        ++i;
    }
    return out;
}

// --- Transliteration -----------------------------------------------------

bool is_currency_cp(uint32_t cp) {
    if (cp == '$') return true;
    if (cp >= 0xA2 && cp <= 0xA5) return true;       // cent, pound, currency, yen
    if (cp >= 0x20A0 && cp <= 0x20CF) return true;   // currency symbols block
    switch (cp) {
        case 0x058F: case 0x060B: case 0x09F2: case 0x09F3: case 0x0BF9:
        case 0x0E3F: case 0x17DB: case 0xFDFC: case 0xFE69: case 0xFF04:
        case 0xFFE0: case 0xFFE1: case 0xFFE5: case 0xFFE6:
            return true;
        default:
            return false;
    }
}

const char* latin1_ascii(uint32_t cp) {
    static const char* table[] = {
        // 0xC0..0xFF
        "A", "A", "A", "A", "A", "A", "AE", "C", "E", "E", "E", "E", "I", "I", "I", "I",
        "D", "N", "O", "O", "O", "O", "O", "x", "O", "U", "U", "U", "U", "Y", "Th", "ss",
        "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
        "d", "n", "o", "o", "o", "o", "o", "/", "o", "u", "u", "u", "u", "y", "th", "y",
    };
    if (cp >= 0xC0 && cp <= 0xFF) return table[cp - 0xC0];
    return nullptr;
}

const char* latin_ext_a_ascii(uint32_t cp) {
    static const char* table[] = {
        // 0x100..0x17F
        "A", "a", "A", "a", "A", "a", "C", "c", "C", "c", "C", "c", "C", "c", "D", "d",
        "D", "d", "E", "e", "E", "e", "E", "e", "E", "e", "E", "e", "G", "g", "G", "g",
        "G", "g", "G", "g", "H", "h", "H", "h", "I", "i", "I", "i", "I", "i", "I", "i",
        "I", "i", "IJ", "ij", "J", "j", "K", "k", "k", "L", "l", "L", "l", "L", "l", "L",
        "l", "L", "l", "N", "n", "N", "n", "N", "n", "n", "N", "n", "O", "o", "O", "o",
        "O", "o", "OE", "oe", "R", "r", "R", "r", "R", "r", "S", "s", "S", "s", "S", "s",
        "S", "s", "T", "t", "T", "t", "T", "t", "U", "u", "U", "u", "U", "u", "U", "u",
        "U", "u", "U", "u", "W", "w", "Y", "y", "Y", "Z", "z", "Z", "z", "Z", "z", "s",
    };
    if (cp >= 0x100 && cp <= 0x17F) return table[cp - 0x100];
    return nullptr;
}

// Appends the closest ASCII rendering of a codepoint; untransliterable
// codepoints are dropped.
void transliterate_cp(uint32_t cp, std::string& out) {
    if (is_currency_cp(cp)) { out.push_back(kCurPending); return; }
    if (cp < 0x80) {
        if (cp == '\t' || cp == '\n' || cp == '\r') { out.push_back(' '); return; }
        if (cp < 0x20 || cp == 0x7F) return; // controls dropped
        out.push_back(static_cast<char>(cp));
        return;
    }
    if (const char* a = latin1_ascii(cp)) { out += a; return; }
    if (const char* a = latin_ext_a_ascii(cp)) { out += a; return; }
    switch (cp) {
        case 0xA0: out.push_back(' '); return;           // nbsp
        case 0xA1: out.push_back('!'); return;
        case 0xBF: out.push_back('?'); return;
        case 0xAB: case 0xBB: out.push_back('"'); return;
        case 0x2018: case 0x2019: case 0x201A: case 0x2032: case 0x02BC:
            out.push_back('\''); return;
        case 0x201C: case 0x201D: case 0x201E: case 0x2033:
            out.push_back('"'); return;
        case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2014:
        case 0x2015: case 0x2212:
            out.push_back('-'); return;
        case 0x2026: out += "..."; return;
        case 0x2044: out.push_back('/'); return;
        case 0x202F: case 0x205F: case 0x3000: out.push_back(' '); return;
        default:
            if (cp >= 0x2000 && cp <= 0x200A) { out.push_back(' '); return; }
            return; // dropped
    }
}

// --- Scanners ------------------------------------------------------------

bool is_url_body_char(unsigned char c) {
    if (c == kCurPending) return true; // currency symbol inside a URL path
    if (c <= 0x20 || c >= 0x80 || c == 0x7F) return false;
    if (c == '"' || c == '<' || c == '>' || c == '\'' || c == '`') return false;
    return true;
}

bool is_url_trailing_junk(char c) {
    switch (c) {
        case '.': case ',': case ';': case ':': case '!': case '?':
        case ')': case ']': case '}': case '\'': case '"': case '*':
        case '-': case '_': case '~':
            return true;
        default:
            return false;
    }
}

bool scheme_at(const std::string& s, size_t i, size_t* scheme_len) {
    static const char* http = "http://";
    static const char* https = "https://";
    for (const char* scheme : {https, http}) {
        const size_t len = std::char_traits<char>::length(scheme);
        if (i + len > s.size()) continue;
        bool match = true;
        for (size_t k = 0; k < len; ++k) {
            if (std::tolower(static_cast<unsigned char>(s[i + k])) != scheme[k]) {
                match = false;
                break;
            }
        }
        if (match) { *scheme_len = len; return true; }
    }
    return false;
}

struct Span { size_t begin, end; };

// Shared by extract_urls (raw text) and the normalizer (ASCII text).
std::vector<Span> find_url_spans(const std::string& s) {
    std::vector<Span> spans;
    size_t i = 0;
    while (i < s.size()) {
        size_t scheme_len = 0;
        const bool boundary = i == 0 || !std::isalnum(static_cast<unsigned char>(s[i - 1]));
        if (!boundary || !scheme_at(s, i, &scheme_len)) { ++i; continue; }
        size_t j = i + scheme_len;
        while (j < s.size() && is_url_body_char(static_cast<unsigned char>(s[j]))) ++j;
        while (j > i + scheme_len && is_url_trailing_junk(s[j - 1])) --j;
        if (j == i + scheme_len) { i = j; continue; } // bare scheme, not a URL
        spans.push_back({i, j});
        i = j;
    }
    return spans;
}

bool is_email_local_char(unsigned char c) {
    return std::isalnum(c) || c == '.' || c == '_' || c == '%' || c == '+' || c == '-';
}

bool is_email_domain_char(unsigned char c) {
    return std::isalnum(c) || c == '.' || c == '-';
}

bool valid_email_domain(const std::string& d) {
    size_t label_start = 0;
    int labels = 0;
    std::string last;
    for (size_t i = 0; i <= d.size(); ++i) {
        if (i == d.size() || d[i] == '.') {
            if (i == label_start) return false; // empty label
            const std::string label = d.substr(label_start, i - label_start);
            if (label.front() == '-' || label.back() == '-') return false;
            ++labels;
            last = label;
            label_start = i + 1;
        }
    }
    if (labels < 2 || last.size() < 2) return false;
    for (char c : last) {
        if (!std::isalpha(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

std::vector<Span> find_email_spans(const std::string& s) {
    std::vector<Span> spans;
    size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '@') { ++i; continue; }
        size_t l = i;
        while (l > 0 && is_email_local_char(static_cast<unsigned char>(s[l - 1]))) --l;
        while (l < i && (s[l] == '.' || s[l] == '-')) ++l; // no leading dots/dashes
        size_t r = i + 1;
        while (r < s.size() && is_email_domain_char(static_cast<unsigned char>(s[r]))) ++r;
        while (r > i + 1 && (s[r - 1] == '.' || s[r - 1] == '-')) --r;
        if (l == i || r == i + 1) { ++i; continue; }
        if (!valid_email_domain(s.substr(i + 1, r - i - 1))) { ++i; continue; }
        spans.push_back({l, r});
        i = r;
    }
    return spans;
}

// Phone candidates: digit groups joined by '-', '.', ' ' or parentheses,
// optionally prefixed with '+<country>'. Validation keeps dates and year
// ranges out: two groups must look like 555-1234, the last group needs at
// least 3 digits and the total digit count must be 7..15.
std::vector<Span> find_phone_spans(const std::string& s) {
    std::vector<Span> spans;
    const size_t n = s.size();
    size_t i = 0;
    auto is_digit = [&](size_t k) { return k < n && std::isdigit(static_cast<unsigned char>(s[k])); };
    while (i < n) {
        const char c = s[i];
        const bool boundary = i == 0 || (!std::isalnum(static_cast<unsigned char>(s[i - 1])) &&
                                         s[i - 1] != '+' && s[i - 1] != '.');
        const bool starts = is_digit(i) || ((c == '+' || c == '(') && is_digit(i + 1));
        if (!boundary || !starts) { ++i; continue; }

        size_t j = i;
        bool plus = false;
        if (s[j] == '+') { plus = true; ++j; }
        std::vector<size_t> groups;
        size_t last_digit = 0;
        bool pending_sep = false;
        while (j < n) {
            if (s[j] == '(') {
                if (j + 1 >= n || !is_digit(j + 1)) break;
                ++j;
                continue;
            }
            if (is_digit(j)) {
                size_t g = 0;
                while (is_digit(j)) { ++j; ++g; }
                groups.push_back(g);
                last_digit = j - 1;
                if (j < n && s[j] == ')') ++j;
                pending_sep = false;
                continue;
            }
            if (!pending_sep && (s[j] == '-' || s[j] == '.' || s[j] == ' ') && is_digit(j + 1)) {
                pending_sep = true;
                ++j;
                continue;
            }
            break;
        }
        size_t total = 0;
        for (size_t g : groups) total += g;
        const size_t end = last_digit + 1;
        const bool end_ok = end >= n || !std::isalnum(static_cast<unsigned char>(s[end]));
        bool valid = end_ok && total >= 7 && total <= 15 && !groups.empty();
        if (valid) {
            if (groups.size() == 1) {
                valid = plus;
            } else if (groups.size() == 2) {
                valid = groups[0] == 3 && groups[1] == 4;
            } else {
                valid = groups.back() >= 3;
            }
        }
        if (valid) {
            spans.push_back({i, end});
            i = end;
        } else {
            i = (groups.empty() ? i : last_digit) + 1;
        }
    }
    return spans;
}

std::string replace_spans(const std::string& s, const std::vector<Span>& spans, char mark) {
    if (spans.empty()) return s;
    std::string out;
    out.reserve(s.size());
    size_t pos = 0;
    for (const Span& sp : spans) {
        out.append(s, pos, sp.begin - pos);
        out.push_back(mark);
        pos = sp.end;
    }
    out.append(s, pos, s.size() - pos);
    return out;
}

std::string tag_numbers(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    size_t i = 0;
    const size_t n = s.size();
    auto is_digit = [&](size_t k) { return k < n && std::isdigit(static_cast<unsigned char>(s[k])); };
    while (i < n) {
        if (!is_digit(i)) { out.push_back(s[i]); ++i; continue; }
        size_t j = i;
        while (j < n) {
            if (is_digit(j)) { ++j; continue; }
            if ((s[j] == '.' || s[j] == ',') && is_digit(j + 1)) { ++j; continue; }
            break;
        }
        const bool single = (j - i == 1);
        const bool standalone = single &&
            (i == 0 || s[i - 1] == ' ') && (j == n || s[j] == ' ');
        out.push_back(standalone ? kDigitMark : kNumberMark);
        i = j;
    }
    return out;
}

std::string collapse_whitespace(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = false;
    for (char c : s) {
        if (c == ' ') {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out.push_back(' ');
        in_space = false;
        out.push_back(c);
    }
    return out;
}

} // namespace

std::string normalize_text(const std::string& raw) {
    // Unicode repair, then closest-ASCII transliteration (case preserved).
    std::vector<uint32_t> cps = repair_mojibake(decode_utf8(raw));
    std::string s;
    s.reserve(raw.size());
    for (uint32_t cp : cps) transliterate_cp(cp, s);

    // Protect tags already present so normalization is idempotent.
    for (const auto& [mark, tag] : kTagTable) {
        size_t pos = 0;
        while ((pos = s.find(tag, pos)) != std::string::npos) {
            s.replace(pos, std::char_traits<char>::length(tag), 1, mark);
            ++pos;
        }
    }

    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

    // Substitution order: URL, EMAIL, PHONE, CUR, NUMBER, DIGIT. Longest
    // patterns first so a URL's digits never leak into <NUMBER>.
    s = replace_spans(s, find_url_spans(s), kUrlMark);
    s = replace_spans(s, find_email_spans(s), kEmailMark);
    s = replace_spans(s, find_phone_spans(s), kPhoneMark);
    for (char& c : s) {
        if (c == kCurPending) c = kCurMark;
    }
    s = tag_numbers(s);
    s = collapse_whitespace(s);

    std::string out;
    out.reserve(s.size() + 16);
    for (char c : s) {
        bool is_mark = false;
        for (const auto& [mark, tag] : kTagTable) {
            if (c == mark) {
                out += tag;
                is_mark = true;
                break;
            }
        }
        if (!is_mark) out.push_back(c);
    }
    return out;
}

std::vector<std::string> extract_urls(const std::string& raw) {
    std::vector<std::string> urls;
    for (const Span& sp : find_url_spans(raw)) {
        urls.push_back(raw.substr(sp.begin, sp.end - sp.begin));
    }
    return urls;
}

PreprocessedPost preprocess(const Post& post) {
    PreprocessedPost out;
    out.post_id = post.id;
    out.normalized_text = normalize_text(post.raw_text);
    out.urls = extract_urls(post.raw_text);
    return out;
}

} // namespace ecol
