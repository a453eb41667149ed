// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "icdbert/encoder.hpp"
#include "icdbert/error.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace icdbert {
namespace {

using testing::jittered_parameters;
using testing::random_example;

ModelConfig eval_config() {
    auto c = ModelConfig::desk(20);
    c.dropout = 0.0;
    return c;
}

/// x * Phi(x) with Phi from the Maclaurin series of erf.
double gelu_series(double x) {
    const double z = x / std::sqrt(2.0);
    double term = z, sum = z;
    for (int n = 1; n < 60; ++n) {
        term *= -z * z / n;
        sum += term / (2 * n + 1);
    }
    const double phi = 0.5 * (1.0 + 2.0 / std::sqrt(M_PI) * sum);
    return x * phi;
}

TEST(Gelu, Values) {
    EXPECT_EQ(gelu(0.0), 0.0);
    EXPECT_NEAR(gelu(10.0), 10.0, 1e-6);
    EXPECT_NEAR(gelu(1.0), 0.841345, 1e-5);
    for (double x = -4.0; x <= 4.0; x += 0.125) EXPECT_NEAR(gelu(x), gelu_series(x), 1e-12) << x;
}

TEST(Gelu, DerivativeMatchesDifferenceQuotient) {
    for (double x = -5.0; x <= 5.0; x += 0.37) {
        const double h = 1e-5;
        EXPECT_NEAR(gelu_derivative(x), (gelu(x + h) - gelu(x - h)) / (2 * h), 1e-8) << x;
    }
}

TEST(LayerNorm, Examples) {
    const std::vector<double> ones(4, 1.0), zeros(4, 0.0);
    for (double v : layer_norm(std::vector<double>(4, 7.0), ones, zeros)) EXPECT_NEAR(v, 0.0, 1e-12);
    const auto y = layer_norm(std::vector<double>{1, 2, 3, 4}, ones, zeros);
    const std::vector<double> expected{-1.3416, -0.4472, 0.4472, 1.3416};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[i], expected[i], 1e-3);

    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(100);
        std::vector<double> v(n);
        for (auto& x : v) x = rng.normal(rng.uniform() * 10 - 5, 0.1 + rng.uniform() * 10);
        const auto out = layer_norm(v, std::vector<double>(n, 1.0), std::vector<double>(n, 0.0));
        const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(n);
        double var = 0.0;
        for (double x : out) var += (x - mean) * (x - mean);
        var /= static_cast<double>(n);
        EXPECT_LE(std::abs(mean), 1e-9);
        EXPECT_NEAR(var, 1.0, 1e-6);
    }
}

TEST(Embeddings, ZeroTablesGiveShift) {
    auto config = eval_config();
    auto params = init_parameters(config, 1);
    params.token_embedding.values.assign(params.token_embedding.size(), 0.0);
    params.position_embedding.values.assign(params.position_embedding.size(), 0.0);
    params.segment_embedding.values.assign(params.segment_embedding.size(), 0.0);
    Rng rng(1);
    for (auto& v : params.embedding_norm.shift.values) v = rng.uniform();
    const auto ex = random_example(rng, config, 5, 8);
    const auto out = embed_inputs(ex, params);
    for (std::size_t t = 0; t < 8; ++t) {
        for (std::size_t h = 0; h < config.hidden; ++h) EXPECT_NEAR(out(t, h), params.embedding_norm.shift[h], 1e-12);
    }
}

TEST(Embeddings, SumOfThreeRows) {
    auto config = eval_config();
    const auto params = jittered_parameters(config, 2, 0.1);
    EncodedExample ex;
    ex.input_ids = {2, 7, 7, 3, 0};
    ex.attention_mask = {1, 1, 1, 1, 0};
    ex.segment_ids = {0, 0, 1, 1, 0};
    ex.labels.assign(config.num_labels, 0);
    const auto sum = embedding_sum(ex, params);
    for (std::size_t t = 0; t < 5; ++t) {
        for (std::size_t h = 0; h < config.hidden; ++h) {
            const double expected = params.token_embedding.at(static_cast<std::size_t>(ex.input_ids[t]), h) +
                                    params.position_embedding.at(t, h) + params.segment_embedding.at(ex.segment_ids[t], h);
            EXPECT_DOUBLE_EQ(sum(t, h), expected);
        }
    }
    bool differs = false;
    for (std::size_t h = 0; h < config.hidden; ++h) differs |= sum(1, h) != sum(2, h);
    EXPECT_TRUE(differs);
}

TEST(Embeddings, RejectsMalformedInput) {
    const auto config = eval_config();
    const auto params = init_parameters(config, 1);
    Rng rng(3);
    auto ex = random_example(rng, config, 4, 6);
    ex.input_ids[1] = static_cast<TokenId>(config.vocab_size);
    EXPECT_THROW(embedding_sum(ex, params), RangeError);
    ex = random_example(rng, config, 4, 6);
    ex.attention_mask.pop_back();
    EXPECT_THROW(embedding_sum(ex, params), SchemaError);
}

double max_relative(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), 1e-3));
    }
    return worst;
}

TEST(Forward, MatchesScalarOracle) {
    const auto config = eval_config();
    Rng rng(10);
    for (int trial = 0; trial < 4; ++trial) {
        const auto params = jittered_parameters(config, 100 + trial, 0.05);
        const std::size_t total = 8 + rng.below(config.max_len - 8);
        const auto ex = random_example(rng, config, 3 + rng.below(total - 3), total);
        const std::vector<EncodedExample> batch{ex};
        const auto act = encoder_forward(batch, params);
        ASSERT_EQ(act.logits.cols, config.num_labels);
        const auto expected = oracle::scalar_logits(params, ex);
        EXPECT_LE(max_relative(act.logits.data, expected), 1e-6);
        EXPECT_EQ(predict_logits(batch, params).data, act.logits.data);
    }
}

TEST(Forward, AttentionRowsAreStochasticAndIgnorePads) {
    const auto config = eval_config();
    const auto params = jittered_parameters(config, 7, 0.05);
    Rng rng(7);
    const std::vector<EncodedExample> batch{random_example(rng, config, 3, 12), random_example(rng, config, 12, 12)};
    const auto act = encoder_forward(batch, params);
    for (const auto& layer : act.attention) {
        for (std::size_t b = 0; b < batch.size(); ++b) {
            for (const auto& head : layer[b]) {
                for (std::size_t i = 0; i < head.rows; ++i) {
                    double real = 0.0, pad = 0.0;
                    for (std::size_t j = 0; j < head.cols; ++j) (batch[b].attention_mask[j] ? real : pad) += head(i, j);
                    EXPECT_NEAR(real, 1.0, 1e-6);
                    EXPECT_LE(pad, 1e-6);
                }
            }
        }
    }
}

TEST(Forward, PadTokensCannotLeak) {
    const auto config = eval_config();
    const auto params = jittered_parameters(config, 8, 0.05);
    Rng rng(8);
    auto ex = random_example(rng, config, 5, 16);
    const auto base = predict_logits(std::vector<EncodedExample>{ex}, params);
    for (std::size_t t = 5; t < 16; ++t) ex.input_ids[t] = static_cast<TokenId>(5 + rng.below(config.vocab_size - 5));
    ex.segment_ids[9] = 1;
    const auto perturbed = predict_logits(std::vector<EncodedExample>{ex}, params);
    for (std::size_t i = 0; i < base.data.size(); ++i) EXPECT_LE(std::abs(base.data[i] - perturbed.data[i]), 1e-6);
}

TEST(Forward, BatchPermutationAndWorkerCount) {
    const auto config = eval_config();
    const auto params = jittered_parameters(config, 9, 0.05);
    Rng rng(9);
    std::vector<EncodedExample> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(random_example(rng, config, 4 + 3 * i, 16));
    const auto logits = predict_logits(batch, params);
    std::vector<EncodedExample> reversed(batch.rbegin(), batch.rend());
    const auto rev = predict_logits(reversed, params, 3);
    for (std::size_t b = 0; b < 4; ++b) {
        for (std::size_t l = 0; l < config.num_labels; ++l) EXPECT_EQ(logits(b, l), rev(3 - b, l));
    }
    EXPECT_EQ(predict_logits(batch, params).data, logits.data);
}

TEST(Forward, DropoutIsSeededAndOffInEval) {
    auto config = ModelConfig::desk(20);
    config.dropout = 0.3;
    const auto params = jittered_parameters(config, 11, 0.05);
    Rng rng(11);
    const std::vector<EncodedExample> batch{random_example(rng, config, 10, 12)};
    ForwardOptions train;
    train.training = true;
    train.dropout_seed = 5;
    train.step = 3;
    const auto a = encoder_forward(batch, params, train).logits;
    const auto b = encoder_forward(batch, params, train).logits;
    EXPECT_EQ(a.data, b.data);
    train.step = 4;
    EXPECT_NE(encoder_forward(batch, params, train).logits.data, a.data);
    EXPECT_EQ(encoder_forward(batch, params).logits.data, predict_logits(batch, params).data);
}

TEST(Classifier, ZeroWeightsAndHandProduct) {
    auto config = eval_config();
    config.hidden = 2;
    config.heads = 1;
    config.num_labels = 2;
    auto params = ModelParameters::zeros(config);
    params.classifier.bias.values = {0.25, -1.5};
    Matrix pooled(3, 2, 0.7);
    const auto z = classify(pooled, params);
    for (std::size_t b = 0; b < 3; ++b) {
        EXPECT_EQ(z(b, 0), 0.25);
        EXPECT_EQ(z(b, 1), -1.5);
    }
    params.classifier.weight.values = {1, 2, 3, 4};  // rows are labels
    Matrix x(1, 2);
    x(0, 0) = 0.5;
    x(0, 1) = -1.0;
    const auto y = classify(x, params);
    EXPECT_DOUBLE_EQ(y(0, 0), 0.5 * 1 - 1.0 * 2 + 0.25);
    EXPECT_DOUBLE_EQ(y(0, 1), 0.5 * 3 - 1.0 * 4 - 1.5);
}

TEST(Loss, BceExamples) {
    auto one = [](double z, double y) {
        Matrix logits(1, 1, z), targets(1, 1, y);
        return bce_with_logits(logits, targets);
    };
    EXPECT_NEAR(one(0, 0), std::log(2.0), 1e-12);
    EXPECT_LE(one(30, 1), 1e-12);
    EXPECT_NEAR(one(1, 1), 0.313262, 1e-6);
    EXPECT_NEAR(one(-800, 1), 800.0, 1e-9);
    EXPECT_TRUE(std::isfinite(one(800, 0)));
    EXPECT_NEAR(one(800, 0), 800.0, 1e-9);
    Matrix z(2, 2), y(2, 2);
    z.data = {0, 1, -2, 3};
    y.data = {1, 0, 1, 1};
    double expected = 0.0;
    for (int i = 0; i < 4; ++i) expected += -(y.data[i] * std::log(sigmoid(z.data[i])) + (1 - y.data[i]) * std::log(1 - sigmoid(z.data[i])));
    EXPECT_NEAR(bce_with_logits(z, y), expected / 4, 1e-12);
}

TEST(Gradients, SaturatedBatchHasFlatClassifierBias) {
    auto config = eval_config();
    auto params = init_parameters(config, 3);
    Rng rng(3);
    std::vector<EncodedExample> batch{random_example(rng, config, 6, 8), random_example(rng, config, 7, 8)};
    for (auto& ex : batch) ex.labels.assign(config.num_labels, 1);
    params.classifier.bias.values.assign(config.num_labels, 40.0);
    const auto g = compute_gradients(batch, params);
    EXPECT_LE(g.loss, 1e-15);
    for (double v : g.gradients.classifier.bias.values) EXPECT_LE(std::abs(v), 1e-10);
}

TEST(Gradients, DuplicatedExampleLeavesMeanGradientUnchanged) {
    const auto config = eval_config();
    const auto params = jittered_parameters(config, 4, 0.05);
    Rng rng(4);
    const auto ex = random_example(rng, config, 6, 10);
    const auto single = compute_gradients(std::vector<EncodedExample>{ex}, params);
    const auto doubled = compute_gradients(std::vector<EncodedExample>{ex, ex}, params);
    EXPECT_NEAR(single.loss, doubled.loss, 1e-15);
    const auto a = tensor_list(single.gradients);
    const auto b = tensor_list(doubled.gradients);
    for (std::size_t t = 0; t < a.size(); ++t) {
        for (std::size_t i = 0; i < a[t]->size(); ++i) EXPECT_NEAR((*a[t])[i], (*b[t])[i], 1e-14) << a[t]->name;
    }
}

TEST(Gradients, NonFiniteParametersAreReported) {
    const auto config = eval_config();
    auto params = init_parameters(config, 1);
    params.layers[1].ff_out.bias[0] = NAN;
    try {
        check_finite(params, "parameters");
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find(params.layers[1].ff_out.bias.name), std::string::npos) << e.what();
    }
}

}  // namespace
}  // namespace icdbert
