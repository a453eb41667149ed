// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "icdbert/matrix.hpp"
#include "icdbert/model.hpp"
#include "icdbert/tokenizer.hpp"

namespace icdbert {

/// Additive pre-softmax bias on padding keys.
inline constexpr double kMaskBias = -1e4;

/// Exact-erf GELU: 0.5 x (1 + erf(x / sqrt 2)).
double gelu(double x);
/// d gelu / dx = Phi(x) + x phi(x).
double gelu_derivative(double x);

/// (v - mean) / sqrt(var + eps) * scale + shift, population variance.
std::vector<double> layer_norm(std::span<const double> v, std::span<const double> scale,
                               std::span<const double> shift, double eps = 1e-12);

struct ForwardOptions {
    /// Dropout is applied only when training.
    bool training = false;
    std::uint64_t dropout_seed = 0;
    std::uint64_t step = 0;
    /// Thread count for per-example work. Results do not depend on it.
    std::size_t workers = 1;
};

struct ForwardActivation {
    /// [layer][example] -> T x H. Index 0 is the embedding output, index l+1 the output of layer l.
    std::vector<std::vector<Matrix>> hidden_states;
    /// [layer][example][head] -> T x T softmax weights before dropout.
    std::vector<std::vector<std::vector<Matrix>>> attention;
    Matrix pooled;  ///< B x H, tanh pooler over [CLS]
    Matrix logits;  ///< B x num_labels
};

/// Pre-norm embedding sum token + position + segment for one example (T x H).
Matrix embedding_sum(const EncodedExample& example, const ModelParameters& params);

/// layer_norm(embedding_sum) with embedding dropout in training mode.
Matrix embed_inputs(const EncodedExample& example, const ModelParameters& params, const ForwardOptions& options = {},
                    std::size_t example_index = 0);

ForwardActivation encoder_forward(std::span<const EncodedExample> batch, const ModelParameters& params,
                                  const ForwardOptions& options = {});

/// logits = pooled W^T + b, one row per example.
Matrix classify(const Matrix& pooled, const ModelParameters& params);

/// Eval-mode logits only; skips recording the full activation set.
Matrix predict_logits(std::span<const EncodedExample> batch, const ModelParameters& params, std::size_t workers = 1);

double sigmoid(double z);

/// Mean over all cells of max(z,0) - z y + log(1 + exp(-|z|)).
double bce_with_logits(const Matrix& logits, const Matrix& targets);

/// Targets as a B x num_labels matrix of 0/1.
Matrix label_matrix(std::span<const EncodedExample> batch);

struct GradientResult {
    double loss = 0.0;
    Matrix logits;
    ModelParameters gradients;
};

/// Exact gradients of the mean BCE loss with respect to every parameter tensor.
/// Per-example gradients are reduced in batch order, so the result does not depend on
/// `options.workers`. Dropout masks are a pure function of (seed, site, step, example, element).
GradientResult compute_gradients(std::span<const EncodedExample> batch, const ModelParameters& params,
                                 const ForwardOptions& options = {});

/// Throws NumericError naming the first tensor holding a NaN or infinity.
void check_finite(const ModelParameters& tensors, std::string_view what);

}  // namespace icdbert
