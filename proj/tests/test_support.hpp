// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "icdbert/encoder.hpp"
#include "icdbert/model.hpp"
#include "icdbert/rng.hpp"
#include "icdbert/tokenizer.hpp"

namespace icdbert::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("icdbert_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

/// Example with `length` real tokens drawn from [5, vocab) followed by padding up to `total`.
inline EncodedExample random_example(Rng& rng, const ModelConfig& config, std::size_t length, std::size_t total) {
    EncodedExample ex;
    ex.input_ids.assign(total, 0);
    ex.attention_mask.assign(total, 0);
    ex.segment_ids.assign(total, 0);
    ex.labels.assign(config.num_labels, 0);
    for (std::size_t t = 0; t < length; ++t) {
        ex.input_ids[t] = static_cast<TokenId>(5 + rng.below(config.vocab_size - 5));
        ex.attention_mask[t] = 1;
    }
    for (auto& l : ex.labels) l = static_cast<std::uint8_t>(rng.below(2));
    return ex;
}

/// Initialised parameters with extra noise on every tensor so that no gradient vanishes by symmetry.
inline ModelParameters jittered_parameters(const ModelConfig& config, std::uint64_t seed, double sigma) {
    auto params = init_parameters(config, seed);
    Rng rng(derive_seed(seed, "jitter", 0));
    params.for_each([&](Tensor& t) {
        for (auto& v : t.values) v += rng.normal(0.0, sigma);
    });
    return params;
}

/// Random small vocabulary over a four-letter alphabet plus a word that is often, but not
/// always, coverable by it.
struct WordPieceCase {
    std::vector<std::string> tokens;  ///< specials first, then pieces
    std::set<std::string> pieces;
    std::string word;
};

inline WordPieceCase random_wordpiece_case(Rng& rng) {
    static const std::string alphabet = "abcd";
    auto random_string = [&](std::size_t len) {
        std::string s;
        for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.below(alphabet.size())];
        return s;
    };
    WordPieceCase c;
    c.tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    const auto n_pieces = 1 + rng.below(14);
    for (std::uint64_t i = 0; i < n_pieces; ++i) {
        std::string piece = random_string(1 + rng.below(4));
        if (rng.below(2)) piece = "##" + piece;
        if (c.pieces.insert(piece).second) c.tokens.push_back(piece);
    }
    const std::vector<std::string> listed(c.pieces.begin(), c.pieces.end());
    if (rng.below(2)) {
        c.word = random_string(1 + rng.below(10));
    } else {
        const auto parts = 1 + rng.below(4);
        for (std::uint64_t i = 0; i < parts && c.word.size() < 12; ++i) {
            std::string p = listed[rng.below(listed.size())];
            if (p.rfind("##", 0) == 0) p = p.substr(2);
            c.word += p;
        }
    }
    return c;
}

/// Scores with frequent ties and a truth vector holding both classes, n in [2, 200].
inline void random_auc_instance(Rng& rng, std::vector<double>& scores, std::vector<std::uint8_t>& truth) {
    const std::size_t n = 2 + rng.below(199);
    const auto levels = 2 + rng.below(30);
    scores.resize(n);
    truth.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
        truth[i] = static_cast<std::uint8_t>(rng.below(2));
    }
    truth[0] = 1;
    truth[1] = 0;
}

}  // namespace icdbert::testing
