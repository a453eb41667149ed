// SPDX-License-Identifier: Apache-2.0
#include "icdbert/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include "binary_io.hpp"
#include "icdbert/error.hpp"
#include "icdbert/rng.hpp"

namespace icdbert {

namespace {

constexpr std::string_view kMagic = "ICDBCKPT";

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? ", " : "") << shape[i];
    out << ']';
    return out.str();
}

void put_tensors(detail::ByteWriter& w, const ModelParameters& params) {
    params.for_each([&](const Tensor& t) {
        w.put_string(t.name);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) w.put<std::uint64_t>(d);
        for (double v : t.values) w.put<double>(v);
    });
}

std::uint64_t checksum(const char* data, std::size_t n) { return fnv1a64(std::string_view(data, n)); }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params, const AdamState* optimizer,
                     const TrainingCursor& cursor) {
    const auto& c = params.config;
    detail::ByteWriter w;
    w.put_bytes(kMagic);
    w.put<std::uint32_t>(kCheckpointVersion);
    for (auto v : {c.vocab_size, c.hidden, c.layers, c.heads, c.ff_dim, c.max_len, c.num_labels}) {
        w.put<std::uint64_t>(v);
    }
    w.put<double>(c.dropout);
    w.put<double>(c.layer_norm_eps);
    w.put<double>(c.init_std);
    w.put<std::uint64_t>(cursor.seed);
    w.put<std::uint64_t>(cursor.epoch);
    w.put<std::uint64_t>(cursor.batch_in_epoch);
    w.put<std::uint64_t>(cursor.global_step);
    w.put<std::uint32_t>(optimizer ? 1 : 0);
    w.put<std::uint64_t>(optimizer ? optimizer->step : 0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(params.tensor_count()));
    put_tensors(w, params);
    if (optimizer) {
        put_tensors(w, optimizer->first_moment);
        put_tensors(w, optimizer->second_moment);
    }
    w.put<std::uint64_t>(checksum(w.bytes().data(), w.bytes().size()));

    // Write to a sibling file and rename so a crash never leaves a half-written checkpoint.
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint " + tmp.string());
        out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename checkpoint into " + path.string() + ": " + ec.message());
}

namespace {

Checkpoint parse_checkpoint(const std::filesystem::path& path, const ModelConfig* expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto fail = [&](const std::string& what) { return CheckpointError(path.string() + ": " + what); };

    if (bytes.size() < kMagic.size() + 4 || std::string_view(bytes.data(), kMagic.size()) != kMagic) {
        throw fail("not a checkpoint file");
    }
    detail::ByteReader r(bytes.data(), bytes.size());
    std::string magic;
    r.get_bytes(kMagic.size(), magic);
    std::uint32_t version = 0;
    r.get(version);
    if (version != kCheckpointVersion) {
        throw fail("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                   std::to_string(kCheckpointVersion) + ")");
    }
    if (bytes.size() < 8 + r.position()) throw fail("truncated checkpoint");
    std::uint64_t stored_sum = 0;
    std::memcpy(&stored_sum, bytes.data() + bytes.size() - 8, 8);
    if (stored_sum != checksum(bytes.data(), bytes.size() - 8)) throw fail("checksum mismatch (truncated or corrupted)");
    detail::ByteReader body(bytes.data(), bytes.size() - 8);
    body.get_bytes(kMagic.size(), magic);
    body.get(version);

    auto need = [&](bool ok) {
        if (!ok) throw fail("truncated checkpoint");
    };
    ModelConfig c;
    std::uint64_t dims[7];
    for (auto& d : dims) need(body.get(d));
    c.vocab_size = dims[0];
    c.hidden = dims[1];
    c.layers = dims[2];
    c.heads = dims[3];
    c.ff_dim = dims[4];
    c.max_len = dims[5];
    c.num_labels = dims[6];
    need(body.get(c.dropout));
    need(body.get(c.layer_norm_eps));
    need(body.get(c.init_std));
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw fail(std::string("stored model config is invalid: ") + e.what());
    }

    Checkpoint ck;
    need(body.get(ck.cursor.seed));
    need(body.get(ck.cursor.epoch));
    need(body.get(ck.cursor.batch_in_epoch));
    need(body.get(ck.cursor.global_step));
    std::uint32_t has_optimizer = 0;
    std::uint64_t adam_step = 0;
    std::uint32_t tensor_count = 0;
    need(body.get(has_optimizer));
    need(body.get(adam_step));
    need(body.get(tensor_count));

    const ModelConfig target = expected ? *expected : c;
    const ModelParameters layout = ModelParameters::zeros(target, false);
    const auto expected_tensors = tensor_list(layout);

    // Validate names and shapes of the parameter section before allocating anything, so a
    // mismatched architecture is reported by the first tensor that differs.
    {
        detail::ByteReader probe = body;
        const std::size_t common = std::min<std::size_t>(tensor_count, expected_tensors.size());
        for (std::size_t i = 0; i < common; ++i) {
            const Tensor* t = expected_tensors[i];
            std::string name;
            std::uint32_t rank = 0;
            need(probe.get_string(name) && probe.get(rank));
            std::vector<std::size_t> shape(rank);
            for (auto& d : shape) {
                std::uint64_t v = 0;
                need(probe.get(v));
                d = v;
            }
            if (name != t->name) throw fail("expected tensor " + t->name + ", found " + name);
            if (shape != t->shape) {
                throw fail("shape mismatch for tensor " + t->name + ": checkpoint " + shape_string(shape) +
                           ", model " + shape_string(t->shape));
            }
            const std::size_t n = t->element_count();
            need(probe.remaining() >= n * sizeof(double));
            std::string skip;
            probe.get_bytes(n * sizeof(double), skip);
        }
    }
    if (tensor_count != expected_tensors.size()) {
        throw fail("tensor count " + std::to_string(tensor_count) + " does not match model (" +
                   std::to_string(expected_tensors.size()) + ")");
    }
    if (target.heads != c.heads) {
        throw fail("attention heads differ: checkpoint " + std::to_string(c.heads) + ", model " +
                   std::to_string(target.heads));
    }

    auto read_section = [&](ModelParameters& into) {
        into.for_each([&](Tensor& t) {
            std::string name;
            std::uint32_t rank = 0;
            need(body.get_string(name) && body.get(rank));
            std::vector<std::size_t> shape(rank);
            for (auto& d : shape) {
                std::uint64_t v = 0;
                need(body.get(v));
                d = v;
            }
            if (name != t.name || shape != t.shape) throw fail("tensor layout mismatch at " + t.name);
            for (auto& v : t.values) need(body.get(v));
        });
    };
    ck.params = ModelParameters::zeros(target);
    read_section(ck.params);
    if (has_optimizer) {
        AdamState state = AdamState::for_model(target);
        state.step = adam_step;
        read_section(state.first_moment);
        read_section(state.second_moment);
        ck.optimizer = std::move(state);
    }
    if (body.remaining() != 0) throw fail("trailing bytes after tensor data");
    return ck;
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(path, nullptr); }

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
    return parse_checkpoint(path, &expected);
}

}  // namespace icdbert
