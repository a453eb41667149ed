// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "icdbert/labels.hpp"

namespace icdbert {

using TokenId = std::int32_t;

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kMaskToken = "[MASK]";

/// WordPiece vocabulary; ids are line indices. Immutable once built.
class Vocabulary {
public:
    /// Validates uniqueness and the presence of all five special tokens.
    explicit Vocabulary(std::vector<std::string> tokens);

    static Vocabulary load(const std::filesystem::path& path);

    std::size_t size() const { return tokens_.size(); }
    std::optional<TokenId> find(const std::string& token) const;
    bool contains(const std::string& token) const { return index_.count(token) != 0; }
    const std::string& token(TokenId id) const;
    const std::vector<std::string>& tokens() const { return tokens_; }

    TokenId pad_id() const { return pad_; }
    TokenId unk_id() const { return unk_; }
    TokenId cls_id() const { return cls_; }
    TokenId sep_id() const { return sep_; }
    TokenId mask_id() const { return mask_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    TokenId pad_ = 0, unk_ = 0, cls_ = 0, sep_ = 0, mask_ = 0;
};

/// Uncased BERT-style normalisation: de-identification spans [**...**] become the word
/// "deid", text is lowercased and accent-stripped, control characters are dropped,
/// whitespace separates words, and every punctuation character is its own word.
std::vector<std::string> normalize(std::string_view text);

inline constexpr std::size_t kMaxWordChars = 100;

/// Greedy longest-match-first WordPiece. Continuation pieces carry a "##" prefix.
/// A word with any unmatched remainder, or longer than `max_chars` code points, becomes [UNK].
std::vector<std::string> wordpiece_tokenize(std::string_view word, const Vocabulary& vocab,
                                            std::size_t max_chars = kMaxWordChars);

/// normalize() followed by wordpiece_tokenize() on every word.
std::vector<std::string> tokenize_text(std::string_view text, const Vocabulary& vocab);

struct EncodedExample {
    AdmissionId admission_id = 0;
    std::vector<TokenId> input_ids;
    std::vector<std::uint8_t> attention_mask;
    std::vector<std::uint8_t> segment_ids;
    LabelVector labels;

    std::size_t length() const { return input_ids.size(); }
    friend bool operator==(const EncodedExample&, const EncodedExample&) = default;
};

inline constexpr std::size_t kDefaultMaxLen = 512;

/// [CLS] + first (max_len - 2) pieces + [SEP], padded with [PAD] to max_len.
EncodedExample encode_example(std::string_view text, LabelVector labels, const Vocabulary& vocab,
                              std::size_t max_len = kDefaultMaxLen);

/// Id -> token, with [PAD] suppressed. Throws RangeError for ids outside the vocabulary.
std::vector<std::string> decode_tokens(std::span<const TokenId> ids, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Tokenized dataset cache (little-endian binary, versioned)
//
//   magic      8 bytes  "ICDTOKv1"
//   version    u32      1
//   max_len    u32
//   n_labels   u32
//   vocab_size u32
//   count      u64
//   count records of:
//     admission_id  i64
//     input_ids     max_len x u32
//     attention     max_len x u8
//     segments      max_len x u8
//     labels        n_labels x u8

inline constexpr std::uint32_t kTokenCacheVersion = 1;

struct TokenizedDataset {
    std::size_t max_len = 0;
    std::size_t num_labels = 0;
    std::size_t vocab_size = 0;
    std::vector<EncodedExample> examples;
};

void write_token_cache(const std::filesystem::path& path, const TokenizedDataset& data);
TokenizedDataset read_token_cache(const std::filesystem::path& path);

}  // namespace icdbert
