// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "icdbert/error.hpp"
#include "icdbert/tokenizer.hpp"

namespace icdbert {

namespace {
constexpr std::string_view kMagic = "ICDTOKv1";
}

void write_token_cache(const std::filesystem::path& path, const TokenizedDataset& data) {
    detail::ByteWriter w;
    w.put_bytes(kMagic);
    w.put<std::uint32_t>(kTokenCacheVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(data.max_len));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(data.num_labels));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(data.vocab_size));
    w.put<std::uint64_t>(data.examples.size());
    for (const auto& ex : data.examples) {
        if (ex.length() != data.max_len || ex.attention_mask.size() != data.max_len ||
            ex.segment_ids.size() != data.max_len || ex.labels.size() != data.num_labels) {
            throw SchemaError("example shape does not match token cache header");
        }
        w.put<std::int64_t>(ex.admission_id);
        for (auto id : ex.input_ids) w.put<std::uint32_t>(static_cast<std::uint32_t>(id));
        for (auto m : ex.attention_mask) w.put<std::uint8_t>(m);
        for (auto s : ex.segment_ids) w.put<std::uint8_t>(s);
        for (auto l : ex.labels) w.put<std::uint8_t>(l);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError("write failed: " + path.string());
}

TokenizedDataset read_token_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    detail::ByteReader r(bytes.data(), bytes.size());

    auto corrupt = [&](const std::string& what) { return SchemaError(path.string() + ": " + what); };
    std::string magic;
    if (!r.get_bytes(kMagic.size(), magic) || magic != kMagic) throw corrupt("not a token cache file");
    std::uint32_t version = 0, max_len = 0, n_labels = 0, vocab_size = 0;
    std::uint64_t count = 0;
    if (!r.get(version)) throw corrupt("truncated header");
    if (version != kTokenCacheVersion) {
        throw corrupt("unsupported token cache version " + std::to_string(version));
    }
    if (!r.get(max_len) || !r.get(n_labels) || !r.get(vocab_size) || !r.get(count)) throw corrupt("truncated header");
    const std::size_t record_size = 8 + 4 * std::size_t{max_len} + 2 * std::size_t{max_len} + n_labels;
    if (r.remaining() != record_size * count) throw corrupt("size does not match record count");

    TokenizedDataset data;
    data.max_len = max_len;
    data.num_labels = n_labels;
    data.vocab_size = vocab_size;
    data.examples.resize(count);
    for (auto& ex : data.examples) {
        r.get(ex.admission_id);
        ex.input_ids.resize(max_len);
        ex.attention_mask.resize(max_len);
        ex.segment_ids.resize(max_len);
        ex.labels.resize(n_labels);
        for (auto& id : ex.input_ids) {
            std::uint32_t v = 0;
            r.get(v);
            if (v >= vocab_size) throw corrupt("token id out of range");
            id = static_cast<TokenId>(v);
        }
        for (auto& m : ex.attention_mask) r.get(m);
        for (auto& s : ex.segment_ids) r.get(s);
        for (auto& l : ex.labels) r.get(l);
    }
    return data;
}

}  // namespace icdbert
