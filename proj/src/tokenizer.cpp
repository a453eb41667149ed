// SPDX-License-Identifier: Apache-2.0
#include "icdbert/tokenizer.hpp"

#include <fstream>

#include "icdbert/error.hpp"

namespace icdbert {

namespace {

// --- UTF-8 ----------------------------------------------------------------

constexpr char32_t kReplacement = 0xFFFD;

/// Decodes one code point starting at s[i] and advances i. Invalid sequences yield U+FFFD.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = kReplacement;
    if (b0 < 0x80) {
        cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return kReplacement;
    }
    if (i + len > s.size()) {
        ++i;
        return kReplacement;
    }
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) {
            ++i;
            return kReplacement;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    i += len;
    return cp;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

/// Byte offsets of code-point boundaries, including the end offset.
std::vector<std::size_t> char_boundaries(std::string_view word) {
    std::vector<std::size_t> bounds{0};
    std::size_t i = 0;
    while (i < word.size()) {
        decode_utf8(word, i);
        bounds.push_back(i);
    }
    return bounds;
}

// --- character classes -------------------------------------------------------

bool is_whitespace(char32_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == 0x0B || c == 0x0C || c == 0xA0 ||
           c == 0x1680 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
           c == 0x205F || c == 0x3000;
}

bool is_control(char32_t c) {
    if (c == '\t' || c == '\n' || c == '\r') return false;
    return c < 0x20 || (c >= 0x7F && c <= 0x9F) || c == 0xAD || (c >= 0x200B && c <= 0x200F) ||
           c == 0xFEFF || c == kReplacement || c == 0;
}

bool is_combining_mark(char32_t c) { return c >= 0x0300 && c <= 0x036F; }

bool is_punctuation(char32_t c) {
    if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126)) {
        return true;
    }
    switch (c) {
        case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
            return true;
        default:
            break;
    }
    return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) || (c >= 0x3001 && c <= 0x3003);
}

/// Lowercase then strip accents for ASCII, Latin-1 and Latin Extended-A letters.
/// Returns 0 when the character disappears entirely.
char32_t fold_case_and_accent(char32_t c) {
    if (c >= 'A' && c <= 'Z') return c + 32;
    if (c < 0xC0) return c;
    if (c <= 0xFF) {
        // Latin-1 supplement, indexed from U+00C0; upper and lower halves share bases.
        static constexpr char kBase[64 + 1] =
            "aaaaaaaceeeeiiii"  // C0-CF
            "dnooooo\0ouuuuyts"  // D0-DF (D7 multiplication sign kept, DE thorn, DF sharp s)
            "aaaaaaaceeeeiiii"  // E0-EF
            "dnooooo\0ouuuuyty";  // F0-FF (F7 division sign kept)
        const char base = kBase[c - 0xC0];
        if (c == 0xD7 || c == 0xF7 || c == 0xC6 || c == 0xE6 || c == 0xDE || c == 0xFE || c == 0xDF) {
            if (c == 0xC6) return 0xE6;
            if (c == 0xDE) return 0xFE;
            return c;
        }
        return static_cast<char32_t>(base);
    }
    if (c >= 0x100 && c <= 0x17F) {
        // Latin Extended-A: letter families in code point order.
        static constexpr char kBase[128 + 1] =
            "aaaaaaccccccccdd"  // 0100-010F
            "ddeeeeeeeeeegggg"  // 0110-011F
            "gggghhhhiiiiiiii"  // 0120-012F
            "ii\0\0jjkkklllllll"  // 0130-013F
            "lllnnnnnnn\0\0oooo"  // 0140-014F
            "oo\0\0rrrrrrssssss"  // 0150-015F
            "ssttttttuuuuuuuu"  // 0160-016F
            "uuuuwwyyyzzzzzzs";  // 0170-017F
        const char base = kBase[c - 0x100];
        if (base != 0) return static_cast<char32_t>(base);
        if ((c & 1) == 0) return c + 1;  // remaining pairs are upper/lower adjacent
        return c;
    }
    if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;  // Greek capitals
    if (c >= 0x410 && c <= 0x42F) return c + 32;                // Cyrillic capitals
    return c;
}

std::string replace_deid_spans(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto open = text.find("[**", pos);
        if (open == std::string_view::npos) break;
        const auto close = text.find("**]", open + 3);
        if (close == std::string_view::npos) break;
        out.append(text.substr(pos, open - pos));
        out.append(" deid ");
        pos = close + 3;
    }
    out.append(text.substr(pos));
    return out;
}

}  // namespace

// --- Vocabulary ---------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        const auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
        if (!inserted) {
            throw SchemaError("duplicate vocabulary token '" + tokens_[i] + "' on lines " +
                              std::to_string(it->second + 1) + " and " + std::to_string(i + 1));
        }
    }
    auto special = [&](std::string_view name) {
        const auto it = index_.find(std::string(name));
        if (it == index_.end()) throw SchemaError("vocabulary is missing special token " + std::string(name));
        return it->second;
    };
    pad_ = special(kPadToken);
    unk_ = special(kUnkToken);
    cls_ = special(kClsToken);
    sep_ = special(kSepToken);
    mask_ = special(kMaskToken);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary " + path.string());
    std::vector<std::string> tokens;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(std::move(line));
    }
    return Vocabulary(std::move(tokens));
}

std::optional<TokenId> Vocabulary::find(const std::string& token) const {
    const auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw RangeError("token id " + std::to_string(id) + " outside vocabulary of size " +
                         std::to_string(tokens_.size()));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

// --- text -> pieces ------------------------------------------------------------

std::vector<std::string> normalize(std::string_view text) {
    const std::string cleaned = replace_deid_spans(text);
    std::vector<std::string> words;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) words.push_back(std::move(current));
        current.clear();
    };
    std::size_t i = 0;
    while (i < cleaned.size()) {
        char32_t c = decode_utf8(cleaned, i);
        if (is_whitespace(c)) {
            flush();
            continue;
        }
        if (is_control(c) || is_combining_mark(c)) continue;
        c = fold_case_and_accent(c);
        if (c == 0) continue;
        if (is_punctuation(c)) {
            flush();
            append_utf8(current, c);
            flush();
            continue;
        }
        append_utf8(current, c);
    }
    flush();
    return words;
}

std::vector<std::string> wordpiece_tokenize(std::string_view word, const Vocabulary& vocab, std::size_t max_chars) {
    const std::vector<std::string> unknown{std::string(kUnkToken)};
    if (word.empty()) return {};
    const auto bounds = char_boundaries(word);
    const std::size_t n_chars = bounds.size() - 1;
    if (n_chars > max_chars) return unknown;

    std::vector<std::string> pieces;
    std::size_t start = 0;
    std::string candidate;
    while (start < n_chars) {
        std::size_t end = n_chars;
        bool matched = false;
        for (; end > start; --end) {
            candidate.clear();
            if (start > 0) candidate = "##";
            candidate.append(word.substr(bounds[start], bounds[end] - bounds[start]));
            if (vocab.contains(candidate)) {
                matched = true;
                break;
            }
        }
        if (!matched) return unknown;
        pieces.push_back(candidate);
        start = end;
    }
    return pieces;
}

std::vector<std::string> tokenize_text(std::string_view text, const Vocabulary& vocab) {
    std::vector<std::string> pieces;
    for (const auto& word : normalize(text)) {
        auto wp = wordpiece_tokenize(word, vocab);
        pieces.insert(pieces.end(), std::make_move_iterator(wp.begin()), std::make_move_iterator(wp.end()));
    }
    return pieces;
}

EncodedExample encode_example(std::string_view text, LabelVector labels, const Vocabulary& vocab,
                              std::size_t max_len) {
    if (max_len < 3) throw ConfigError("max_len must be >= 3");
    const auto pieces = tokenize_text(text, vocab);
    const std::size_t kept = std::min(pieces.size(), max_len - 2);

    EncodedExample ex;
    ex.input_ids.assign(max_len, vocab.pad_id());
    ex.attention_mask.assign(max_len, 0);
    ex.segment_ids.assign(max_len, 0);
    ex.labels = std::move(labels);

    ex.input_ids[0] = vocab.cls_id();
    for (std::size_t i = 0; i < kept; ++i) ex.input_ids[i + 1] = *vocab.find(pieces[i]);
    ex.input_ids[kept + 1] = vocab.sep_id();
    for (std::size_t i = 0; i < kept + 2; ++i) ex.attention_mask[i] = 1;
    return ex;
}

std::vector<std::string> decode_tokens(std::span<const TokenId> ids, const Vocabulary& vocab) {
    std::vector<std::string> out;
    for (auto id : ids) {
        const auto& tok = vocab.token(id);
        if (id == vocab.pad_id()) continue;
        out.push_back(tok);
    }
    return out;
}

}  // namespace icdbert
