// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace icdbert {

struct ModelConfig {
    std::size_t vocab_size = 200;
    std::size_t hidden = 64;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t ff_dim = 128;
    std::size_t max_len = 64;
    std::size_t num_labels = 20;
    double dropout = 0.1;
    double layer_norm_eps = 1e-12;
    /// Standard deviation of the random initialisation for weight matrices and embeddings.
    double init_std = 0.125;

    /// BERT-base sized encoder: 30,522 vocabulary, 768 hidden, 12 layers, 12 heads.
    static ModelConfig paper(std::size_t num_labels = 20);
    /// Small encoder for CPU experiments and tests; initialised with std 1/sqrt(hidden).
    static ModelConfig desk(std::size_t num_labels = 20);
    static ModelConfig preset(std::string_view name, std::size_t num_labels);

    std::size_t head_dim() const { return hidden / heads; }
    /// Throws ConfigError on the first violated invariant.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Total trainable parameters implied by the configuration, pooler and classifier included.
std::size_t parameter_count(const ModelConfig& config);

struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;

    Tensor() = default;
    Tensor(std::string name, std::vector<std::size_t> shape, double fill = 0.0, bool allocate = true);

    /// Element count implied by the shape (valid even when values are not allocated).
    std::size_t element_count() const;

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    /// Row-major 2-D access.
    double& at(std::size_t r, std::size_t c) { return values[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * shape[1] + c]; }
};

/// y = x W + b with W stored [in, out].
struct DenseParams {
    Tensor weight;
    Tensor bias;
};

struct NormParams {
    Tensor scale;
    Tensor shift;
};

struct LayerParams {
    DenseParams query, key, value, attention_output;
    NormParams attention_norm;
    DenseParams ff_in, ff_out;
    NormParams output_norm;
};

struct ModelParameters {
    ModelConfig config;
    Tensor token_embedding;     ///< [vocab, H]
    Tensor position_embedding;  ///< [max_len, H]
    Tensor segment_embedding;   ///< [2, H]
    NormParams embedding_norm;
    std::vector<LayerParams> layers;
    DenseParams pooler;         ///< tanh dense over the [CLS] state, [H, H]
    DenseParams classifier;     ///< weight stored [num_labels, H]

    /// All parameters (or gradients) zero-filled with the shapes implied by `config`.
    /// With `allocate == false` only names and shapes are filled in.
    static ModelParameters zeros(const ModelConfig& config, bool allocate = true);

    /// Visits every tensor in a fixed canonical order (the checkpoint order).
    template <typename F>
    void for_each(F&& f) {
        visit(*this, f);
    }
    template <typename F>
    void for_each(F&& f) const {
        visit(*this, f);
    }

    std::size_t parameter_count() const;
    std::size_t tensor_count() const;

private:
    template <typename Self, typename F>
    static void visit(Self& self, F& f) {
        f(self.token_embedding);
        f(self.position_embedding);
        f(self.segment_embedding);
        f(self.embedding_norm.scale);
        f(self.embedding_norm.shift);
        for (auto& layer : self.layers) {
            for (auto* d : {&layer.query, &layer.key, &layer.value, &layer.attention_output}) {
                f(d->weight);
                f(d->bias);
            }
            f(layer.attention_norm.scale);
            f(layer.attention_norm.shift);
            f(layer.ff_in.weight);
            f(layer.ff_in.bias);
            f(layer.ff_out.weight);
            f(layer.ff_out.bias);
            f(layer.output_norm.scale);
            f(layer.output_norm.shift);
        }
        f(self.pooler.weight);
        f(self.pooler.bias);
        f(self.classifier.weight);
        f(self.classifier.bias);
    }
};

/// Weights and embeddings ~ N(0, init_std^2), biases 0, layer-norm scale 1 and shift 0.
/// Identical seeds give bit-identical parameters.
ModelParameters init_parameters(const ModelConfig& config, std::uint64_t seed);

/// Flat views over the tensors of one parameter set, in canonical order.
std::vector<Tensor*> tensor_list(ModelParameters& params);
std::vector<const Tensor*> tensor_list(const ModelParameters& params);

}  // namespace icdbert
