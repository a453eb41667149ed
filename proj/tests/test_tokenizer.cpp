// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numeric>

#include "icdbert/error.hpp"
#include "icdbert/tokenizer.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace icdbert {
namespace {

using testing::TempDir;
using testing::write_text;

Vocabulary make_vocab(std::vector<std::string> extra) {
    std::vector<std::string> tokens{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    tokens.insert(tokens.end(), extra.begin(), extra.end());
    return Vocabulary(std::move(tokens));
}

TEST(Vocabulary, IdsFollowLineOrder) {
    TempDir dir("vocab");
    write_text(dir / "v.txt", "the\n[CLS]\na\n[PAD]\n[SEP]\nof\n[UNK]\nand\n[MASK]\nto\n");
    const auto vocab = Vocabulary::load(dir / "v.txt");
    EXPECT_EQ(vocab.size(), 10u);
    EXPECT_EQ(vocab.pad_id(), 3);
    EXPECT_EQ(vocab.cls_id(), 1);
    EXPECT_EQ(vocab.unk_id(), 6);
    EXPECT_EQ(vocab.mask_id(), 8);
    EXPECT_EQ(vocab.find("to"), 9);
    EXPECT_EQ(vocab.token(0), "the");
}

TEST(Vocabulary, DuplicateCitesBothLines) {
    TempDir dir("vocab");
    write_text(dir / "v.txt", "[PAD]\n[UNK]\nthe\n[CLS]\n[SEP]\n[MASK]\nthe\n");
    try {
        Vocabulary::load(dir / "v.txt");
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("'the'"), std::string::npos) << what;
        EXPECT_NE(what.find('3'), std::string::npos) << what;
        EXPECT_NE(what.find('7'), std::string::npos) << what;
    }
}

TEST(Vocabulary, MissingSpecialIsNamed) {
    try {
        Vocabulary({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "x"});
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("[MASK]"), std::string::npos);
    }
    EXPECT_THROW(Vocabulary::load("/nonexistent/vocab.txt"), IoError);
}

TEST(Normalize, Examples) {
    using W = std::vector<std::string>;
    EXPECT_EQ(normalize("Chest X-Ray: clear."), (W{"chest", "x", "-", "ray", ":", "clear", "."}));
    EXPECT_EQ(normalize("[**2101-10-4**] admitted"), (W{"deid", "admitted"}));
    EXPECT_EQ(normalize(""), W{});
    EXPECT_EQ(normalize("  \t\n "), W{});
    EXPECT_EQ(normalize("Pt seen by Dr. [**Last Name (NamePattern1) 123**],BP 120/80"),
              (W{"pt", "seen", "by", "dr", ".", "deid", ",", "bp", "120", "/", "80"}));
    EXPECT_EQ(normalize("Caf\xC3\xA9 NA\xC3\x8FVE"), (W{"cafe", "naive"}));
    EXPECT_EQ(normalize("a\x01" "b\x7f c"), (W{"ab", "c"}));
}

TEST(WordPiece, Examples) {
    const auto vocab = make_vocab({"un", "##aff", "##able", "aff", "able", "##a", "##ff", "hello"});
    using W = std::vector<std::string>;
    EXPECT_EQ(wordpiece_tokenize("unaffable", vocab), (W{"un", "##aff", "##able"}));
    EXPECT_EQ(wordpiece_tokenize("hello", vocab), (W{"hello"}));
    EXPECT_EQ(wordpiece_tokenize("zzzz", vocab), (W{"[UNK]"}));
    EXPECT_EQ(wordpiece_tokenize("unaffablez", vocab), (W{"[UNK]"}));
    EXPECT_EQ(wordpiece_tokenize(std::string(101, 'a'), make_vocab({"a", "##a"})), (W{"[UNK]"}));
    EXPECT_EQ(wordpiece_tokenize(std::string(100, 'a'), make_vocab({"a", "##a"})).size(), 100u);
}

TEST(WordPiece, MatchesExhaustiveSegmentation) {
    Rng rng(2024);
    std::size_t known = 0;
    for (int trial = 0; trial < 3000; ++trial) {
        const auto c = testing::random_wordpiece_case(rng);
        const Vocabulary vocab(c.tokens);
        const auto got = wordpiece_tokenize(c.word, vocab);
        EXPECT_EQ(got, oracle::exhaustive_wordpiece(c.word, c.pieces)) << "word " << c.word;
        if (got != std::vector<std::string>{"[UNK]"}) {
            ++known;
            std::string rebuilt;
            for (const auto& p : got) rebuilt += p.rfind("##", 0) == 0 ? p.substr(2) : p;
            EXPECT_EQ(rebuilt, c.word);
        }
    }
    // The generator is meant to exercise both outcomes.
    EXPECT_GT(known, 300u);
    EXPECT_LT(known, 2700u);
}

TEST(WordPiece, GreedyIsNotGlobalCoverage) {
    // Greedy takes "ab" and is then stuck on "c", even though "a" + "##bc" would cover the word.
    const auto vocab = make_vocab({"a", "ab", "##bc"});
    EXPECT_EQ(wordpiece_tokenize("abc", vocab), std::vector<std::string>{"[UNK]"});
}

TEST(Encode, LayoutAndPadding) {
    const auto vocab = make_vocab({"one", "two", "three", "four", "five"});
    const auto ex = encode_example("one two three four", {1, 0}, vocab, 8);
    const std::vector<TokenId> ids{2, 5, 6, 7, 8, 3, 0, 0};
    EXPECT_EQ(ex.input_ids, ids);
    EXPECT_EQ(ex.attention_mask, (std::vector<std::uint8_t>{1, 1, 1, 1, 1, 1, 0, 0}));
    EXPECT_EQ(ex.segment_ids, std::vector<std::uint8_t>(8, 0));
    EXPECT_EQ(ex.labels, (LabelVector{1, 0}));

    const auto empty = encode_example("", {0, 1}, vocab, 5);
    EXPECT_EQ(empty.input_ids, (std::vector<TokenId>{2, 3, 0, 0, 0}));
    EXPECT_EQ(empty.attention_mask, (std::vector<std::uint8_t>{1, 1, 0, 0, 0}));
    EXPECT_THROW(encode_example("x", {}, vocab, 2), ConfigError);
}

TEST(Encode, HeadTruncation) {
    const auto vocab = make_vocab({"w"});
    std::string text;
    for (int i = 0; i < 600; ++i) text += "w ";
    const auto ex = encode_example(text, {}, vocab, 512);
    EXPECT_EQ(ex.length(), 512u);
    EXPECT_EQ(std::accumulate(ex.attention_mask.begin(), ex.attention_mask.end(), 0), 512);
    EXPECT_EQ(ex.input_ids.front(), vocab.cls_id());
    EXPECT_EQ(ex.input_ids.back(), vocab.sep_id());
    EXPECT_EQ(std::count(ex.input_ids.begin(), ex.input_ids.end(), *vocab.find("w")), 510);

    const auto head = encode_example("one two three", {}, make_vocab({"one", "two", "three"}), 4);
    EXPECT_EQ(head.input_ids, (std::vector<TokenId>{2, 5, 6, 3}));
}

TEST(Encode, MaskInvariantsOnRandomTexts) {
    const auto vocab = make_vocab({"a", "b", "c", "##b", ".", ","});
    Rng rng(5);
    const std::string chars = "abc., xyz";
    for (int trial = 0; trial < 300; ++trial) {
        std::string text;
        const auto len = rng.below(60);
        for (std::uint64_t i = 0; i < len; ++i) text += chars[rng.below(chars.size())];
        const std::size_t max_len = 3 + rng.below(30);
        const auto ex = encode_example(text, {1}, vocab, max_len);
        const auto pieces = tokenize_text(text, vocab);
        ASSERT_EQ(ex.length(), max_len);
        const auto real = std::accumulate(ex.attention_mask.begin(), ex.attention_mask.end(), std::size_t{0});
        EXPECT_EQ(real, 2 + std::min(pieces.size(), max_len - 2));
        for (std::size_t i = 0; i < max_len; ++i) {
            EXPECT_EQ(ex.attention_mask[i] == 1, ex.input_ids[i] != vocab.pad_id());
            if (i > 0 && ex.attention_mask[i]) {
                EXPECT_EQ(ex.attention_mask[i - 1], 1);
            }
        }
        EXPECT_EQ(ex.input_ids[0], vocab.cls_id());
        EXPECT_EQ(ex.input_ids[real - 1], vocab.sep_id());
        EXPECT_EQ(encode_example(text, {1}, vocab, max_len), ex);
    }
}

TEST(Decode, RoundTripAndRange) {
    const auto vocab = make_vocab({"hello", "world"});
    const auto ex = encode_example("Hello world", {}, vocab, 8);
    EXPECT_EQ(decode_tokens(ex.input_ids, vocab), (std::vector<std::string>{"[CLS]", "hello", "world", "[SEP]"}));
    EXPECT_TRUE(decode_tokens({}, vocab).empty());
    const std::vector<TokenId> bad{static_cast<TokenId>(vocab.size())};
    EXPECT_THROW(decode_tokens(bad, vocab), RangeError);
}

TEST(TokenCache, RoundTripAndCorruption) {
    TempDir dir("tok");
    const auto vocab = make_vocab({"a", "b"});
    TokenizedDataset data;
    data.max_len = 6;
    data.num_labels = 3;
    data.vocab_size = vocab.size();
    for (int i = 0; i < 5; ++i) {
        auto ex = encode_example(i % 2 ? "a b a" : "b", {1, 0, static_cast<std::uint8_t>(i % 2)}, vocab, 6);
        ex.admission_id = 100 + i;
        data.examples.push_back(ex);
    }
    write_token_cache(dir / "t.tok", data);
    const auto back = read_token_cache(dir / "t.tok");
    EXPECT_EQ(back.max_len, 6u);
    EXPECT_EQ(back.num_labels, 3u);
    EXPECT_EQ(back.vocab_size, vocab.size());
    EXPECT_EQ(back.examples, data.examples);

    auto bytes = testing::read_bytes(dir / "t.tok");
    write_text(dir / "short.tok", bytes.substr(0, bytes.size() - 1));
    EXPECT_THROW(read_token_cache(dir / "short.tok"), SchemaError);
    bytes[8] = 9;
    write_text(dir / "version.tok", bytes);
    EXPECT_THROW(read_token_cache(dir / "version.tok"), SchemaError);
    write_text(dir / "junk.tok", "not a cache");
    EXPECT_THROW(read_token_cache(dir / "junk.tok"), SchemaError);
}

}  // namespace
}  // namespace icdbert
