// SPDX-License-Identifier: Apache-2.0
#include "icdbert/model.hpp"

#include <algorithm>
#include <cmath>

#include "icdbert/error.hpp"
#include "icdbert/rng.hpp"

namespace icdbert {

ModelConfig ModelConfig::paper(std::size_t num_labels) {
    ModelConfig c;
    c.vocab_size = 30522;
    c.hidden = 768;
    c.layers = 12;
    c.heads = 12;
    c.ff_dim = 3072;
    c.max_len = 512;
    c.num_labels = num_labels;
    c.dropout = 0.1;
    c.init_std = 0.02;
    return c;
}

ModelConfig ModelConfig::desk(std::size_t num_labels) {
    ModelConfig c;
    c.num_labels = num_labels;
    return c;
}

ModelConfig ModelConfig::preset(std::string_view name, std::size_t num_labels) {
    if (name == "paper") return paper(num_labels);
    if (name == "desk") return desk(num_labels);
    throw ConfigError("unknown model preset '" + std::string(name) + "' (expected desk or paper)");
}

void ModelConfig::validate() const {
    if (vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
    if (hidden < 2) throw ConfigError("hidden must be >= 2");
    if (layers < 1) throw ConfigError("layers must be >= 1");
    if (heads < 1 || hidden % heads != 0) throw ConfigError("hidden must be divisible by heads");
    if (ff_dim < 1) throw ConfigError("ff_dim must be >= 1");
    if (max_len < 3) throw ConfigError("max_len must be >= 3");
    if (num_labels < 1) throw ConfigError("num_labels must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (!(layer_norm_eps > 0.0)) throw ConfigError("layer_norm_eps must be > 0");
    if (!(init_std >= 0.0) || !std::isfinite(init_std)) throw ConfigError("init_std must be finite and >= 0");
}

std::size_t parameter_count(const ModelConfig& c) {
    const std::size_t h = c.hidden;
    const std::size_t embeddings = (c.vocab_size + c.max_len + 2) * h + 2 * h;
    const std::size_t attention = 4 * (h * h + h) + 2 * h;
    const std::size_t feed_forward = (h * c.ff_dim + c.ff_dim) + (c.ff_dim * h + h) + 2 * h;
    const std::size_t pooler = h * h + h;
    const std::size_t classifier = c.num_labels * h + c.num_labels;
    return embeddings + c.layers * (attention + feed_forward) + pooler + classifier;
}

Tensor::Tensor(std::string name_, std::vector<std::size_t> shape_, double fill, bool allocate)
    : name(std::move(name_)), shape(std::move(shape_)) {
    if (allocate) values.assign(element_count(), fill);
}

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

ModelParameters ModelParameters::zeros(const ModelConfig& c, bool allocate) {
    c.validate();
    const std::size_t h = c.hidden;
    auto tensor = [&](std::string name, std::vector<std::size_t> shape) {
        return Tensor(std::move(name), std::move(shape), 0.0, allocate);
    };
    auto dense = [&](const std::string& prefix, std::size_t in, std::size_t out) {
        return DenseParams{tensor(prefix + ".weight", {in, out}), tensor(prefix + ".bias", {out})};
    };
    auto norm = [&](const std::string& prefix) {
        return NormParams{tensor(prefix + ".scale", {h}), tensor(prefix + ".shift", {h})};
    };

    ModelParameters p;
    p.config = c;
    p.token_embedding = tensor("embeddings.token", {c.vocab_size, h});
    p.position_embedding = tensor("embeddings.position", {c.max_len, h});
    p.segment_embedding = tensor("embeddings.segment", {2, h});
    p.embedding_norm = norm("embeddings.norm");
    for (std::size_t l = 0; l < c.layers; ++l) {
        const std::string prefix = "layer." + std::to_string(l) + ".";
        LayerParams layer;
        layer.query = dense(prefix + "attention.query", h, h);
        layer.key = dense(prefix + "attention.key", h, h);
        layer.value = dense(prefix + "attention.value", h, h);
        layer.attention_output = dense(prefix + "attention.output", h, h);
        layer.attention_norm = norm(prefix + "attention.norm");
        layer.ff_in = dense(prefix + "ff.in", h, c.ff_dim);
        layer.ff_out = dense(prefix + "ff.out", c.ff_dim, h);
        layer.output_norm = norm(prefix + "output.norm");
        p.layers.push_back(std::move(layer));
    }
    p.pooler = dense("pooler", h, h);
    p.classifier = DenseParams{tensor("classifier.weight", {c.num_labels, h}), tensor("classifier.bias", {c.num_labels})};
    return p;
}

std::size_t ModelParameters::parameter_count() const {
    std::size_t n = 0;
    for_each([&](const Tensor& t) { n += t.element_count(); });
    return n;
}

std::size_t ModelParameters::tensor_count() const {
    std::size_t n = 0;
    for_each([&](const Tensor&) { ++n; });
    return n;
}

ModelParameters init_parameters(const ModelConfig& config, std::uint64_t seed) {
    ModelParameters p = ModelParameters::zeros(config);
    Rng rng(derive_seed(seed, "init-parameters"));
    p.for_each([&](Tensor& t) {
        const bool is_scale = t.name.ends_with(".scale");
        const bool is_vector = t.shape.size() == 1;
        if (is_scale) {
            std::fill(t.values.begin(), t.values.end(), 1.0);
        } else if (!is_vector) {
            for (auto& v : t.values) v = rng.normal(0.0, config.init_std);
        }
    });
    return p;
}

std::vector<Tensor*> tensor_list(ModelParameters& params) {
    std::vector<Tensor*> out;
    params.for_each([&](Tensor& t) { out.push_back(&t); });
    return out;
}

std::vector<const Tensor*> tensor_list(const ModelParameters& params) {
    std::vector<const Tensor*> out;
    params.for_each([&](const Tensor& t) { out.push_back(&t); });
    return out;
}

}  // namespace icdbert
