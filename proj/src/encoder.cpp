// SPDX-License-Identifier: Apache-2.0
#include "icdbert/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "icdbert/error.hpp"
#include "icdbert/rng.hpp"

namespace icdbert {

namespace {

// Dropout sites. Layer l uses kFirstLayerSite + 3 l + {0: attention weights, 1: attention output, 2: ff output}.
constexpr std::uint64_t kEmbeddingSite = 0;
constexpr std::uint64_t kPoolerSite = 1;
constexpr std::uint64_t kFirstLayerSite = 2;

struct DropoutMask {
    std::vector<double> scale;  ///< 0 or 1 / (1 - rate) per element; empty when inactive
    bool active() const { return !scale.empty(); }
};

DropoutMask make_mask(const ForwardOptions& options, double rate, std::uint64_t site, std::size_t example,
                      std::size_t n) {
    DropoutMask mask;
    if (!options.training || rate <= 0.0) return mask;
    mask.scale.resize(n);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t e = 0; e < n; ++e) {
        const double u = counter_uniform(options.dropout_seed, site, options.step, example, e);
        mask.scale[e] = u < rate ? 0.0 : keep_scale;
    }
    return mask;
}

void apply_mask(std::span<double> values, const DropoutMask& mask) {
    if (!mask.active()) return;
    for (std::size_t i = 0; i < values.size(); ++i) values[i] *= mask.scale[i];
}

struct NormCache {
    Matrix normalized;
    std::vector<double> inv_std;
};

Matrix layer_norm_rows(const Matrix& x, const NormParams& p, double eps, NormCache& cache) {
    const std::size_t n = x.cols;
    Matrix y(x.rows, n);
    cache.normalized = Matrix(x.rows, n);
    cache.inv_std.assign(x.rows, 0.0);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const auto in = x.row(r);
        double mean = 0.0;
        for (double v : in) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : in) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        const double inv_std = 1.0 / std::sqrt(var + eps);
        cache.inv_std[r] = inv_std;
        for (std::size_t c = 0; c < n; ++c) {
            const double xhat = (in[c] - mean) * inv_std;
            cache.normalized(r, c) = xhat;
            y(r, c) = xhat * p.scale[c] + p.shift[c];
        }
    }
    return y;
}

Matrix layer_norm_rows_backward(const Matrix& dy, const NormCache& cache, const NormParams& p, NormParams& g) {
    const std::size_t n = dy.cols;
    Matrix dx(dy.rows, n);
    std::vector<double> dxhat(n);
    for (std::size_t r = 0; r < dy.rows; ++r) {
        double mean_dxhat = 0.0;
        double mean_dxhat_xhat = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            const double d = dy(r, c);
            const double xhat = cache.normalized(r, c);
            g.scale[c] += d * xhat;
            g.shift[c] += d;
            dxhat[c] = d * p.scale[c];
            mean_dxhat += dxhat[c];
            mean_dxhat_xhat += dxhat[c] * xhat;
        }
        mean_dxhat /= static_cast<double>(n);
        mean_dxhat_xhat /= static_cast<double>(n);
        for (std::size_t c = 0; c < n; ++c) {
            dx(r, c) = cache.inv_std[r] * (dxhat[c] - mean_dxhat - cache.normalized(r, c) * mean_dxhat_xhat);
        }
    }
    return dx;
}

Matrix dense_forward(const Matrix& x, const DenseParams& p) {
    const std::size_t in = p.weight.shape[0];
    const std::size_t out = p.weight.shape[1];
    Matrix y(x.rows, out);
    for (std::size_t r = 0; r < x.rows; ++r) {
        double* yr = &y.data[r * out];
        for (std::size_t j = 0; j < out; ++j) yr[j] = p.bias[j];
        for (std::size_t i = 0; i < in; ++i) {
            const double xv = x(r, i);
            const double* w = &p.weight.values[i * out];
            for (std::size_t j = 0; j < out; ++j) yr[j] += xv * w[j];
        }
    }
    return y;
}

/// Accumulates weight and bias gradients; adds the input gradient into `dx`.
void dense_backward(const Matrix& x, const Matrix& dy, const DenseParams& p, DenseParams& g, Matrix& dx) {
    const std::size_t in = p.weight.shape[0];
    const std::size_t out = p.weight.shape[1];
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double* dyr = &dy.data[r * out];
        for (std::size_t j = 0; j < out; ++j) g.bias[j] += dyr[j];
        for (std::size_t i = 0; i < in; ++i) {
            const double xv = x(r, i);
            double* gw = &g.weight.values[i * out];
            const double* w = &p.weight.values[i * out];
            double acc = 0.0;
            for (std::size_t j = 0; j < out; ++j) {
                gw[j] += xv * dyr[j];
                acc += w[j] * dyr[j];
            }
            dx(r, i) += acc;
        }
    }
}

bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

struct LayerTrace {
    Matrix input, query, key, value;
    std::vector<Matrix> weights;  ///< per head, T x T, before dropout
    DropoutMask weight_mask;      ///< heads x T x T
    Matrix context;
    DropoutMask attention_output_mask;
    NormCache attention_norm;
    Matrix attention_norm_out;
    Matrix ff_pre, ff_act;
    DropoutMask ff_output_mask;
    NormCache output_norm;
    Matrix output;
};

struct ExampleTrace {
    NormCache embedding_norm;
    DropoutMask embedding_mask;
    Matrix embedded;
    std::vector<LayerTrace> layers;
    std::vector<double> pooled;
    DropoutMask pooled_mask;
    std::vector<double> pooled_dropped;
    std::vector<double> logits;
};

void check_example(const EncodedExample& ex, const ModelConfig& c) {
    if (ex.input_ids.size() > c.max_len) {
        throw RangeError("sequence length " + std::to_string(ex.input_ids.size()) + " exceeds max_len " +
                         std::to_string(c.max_len));
    }
    if (ex.attention_mask.size() != ex.input_ids.size() || ex.segment_ids.size() != ex.input_ids.size()) {
        throw SchemaError("input_ids, attention_mask and segment_ids lengths differ");
    }
    for (auto id : ex.input_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
            throw RangeError("token id " + std::to_string(id) + " outside vocabulary of size " +
                             std::to_string(c.vocab_size));
        }
    }
    for (auto s : ex.segment_ids) {
        if (s > 1) throw RangeError("segment id must be 0 or 1");
    }
}

void attention_forward(const ModelParameters& params, const EncodedExample& ex, const ForwardOptions& options,
                       std::size_t layer_index, std::size_t example_index, LayerTrace& t) {
    const auto& c = params.config;
    const std::size_t T = ex.input_ids.size();
    const std::size_t d = c.head_dim();
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

    t.weights.assign(c.heads, Matrix(T, T));
    t.weight_mask = make_mask(options, c.dropout, kFirstLayerSite + 3 * layer_index, example_index, c.heads * T * T);
    t.context = Matrix(T, c.hidden);
    std::vector<double> dropped(T);
    for (std::size_t h = 0; h < c.heads; ++h) {
        const std::size_t off = h * d;
        Matrix& w = t.weights[h];
        for (std::size_t i = 0; i < T; ++i) {
            double max_score = -INFINITY;
            for (std::size_t j = 0; j < T; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < d; ++k) s += t.query(i, off + k) * t.key(j, off + k);
                s = s * inv_sqrt_d + (ex.attention_mask[j] ? 0.0 : kMaskBias);
                w(i, j) = s;
                max_score = std::max(max_score, s);
            }
            double total = 0.0;
            for (std::size_t j = 0; j < T; ++j) {
                w(i, j) = std::exp(w(i, j) - max_score);
                total += w(i, j);
            }
            for (std::size_t j = 0; j < T; ++j) w(i, j) /= total;

            for (std::size_t j = 0; j < T; ++j) {
                dropped[j] = w(i, j) * (t.weight_mask.active() ? t.weight_mask.scale[(h * T + i) * T + j] : 1.0);
            }
            for (std::size_t j = 0; j < T; ++j) {
                const double pj = dropped[j];
                if (pj == 0.0) continue;
                for (std::size_t k = 0; k < d; ++k) t.context(i, off + k) += pj * t.value(j, off + k);
            }
        }
    }
}

ExampleTrace forward_example(const EncodedExample& ex, const ModelParameters& params, const ForwardOptions& options,
                             std::size_t example_index) {
    const auto& c = params.config;
    check_example(ex, c);
    const std::size_t T = ex.input_ids.size();
    ExampleTrace tr;

    tr.embedded = layer_norm_rows(embedding_sum(ex, params), params.embedding_norm, c.layer_norm_eps,
                                  tr.embedding_norm);
    tr.embedding_mask = make_mask(options, c.dropout, kEmbeddingSite, example_index, T * c.hidden);
    apply_mask(tr.embedded.data, tr.embedding_mask);

    const Matrix* x = &tr.embedded;
    tr.layers.resize(c.layers);
    for (std::size_t l = 0; l < c.layers; ++l) {
        const auto& lp = params.layers[l];
        auto& t = tr.layers[l];
        t.input = *x;
        t.query = dense_forward(t.input, lp.query);
        t.key = dense_forward(t.input, lp.key);
        t.value = dense_forward(t.input, lp.value);
        attention_forward(params, ex, options, l, example_index, t);

        Matrix attn_out = dense_forward(t.context, lp.attention_output);
        t.attention_output_mask = make_mask(options, c.dropout, kFirstLayerSite + 3 * l + 1, example_index,
                                            T * c.hidden);
        apply_mask(attn_out.data, t.attention_output_mask);
        for (std::size_t i = 0; i < attn_out.data.size(); ++i) attn_out.data[i] += t.input.data[i];
        t.attention_norm_out = layer_norm_rows(attn_out, lp.attention_norm, c.layer_norm_eps, t.attention_norm);

        t.ff_pre = dense_forward(t.attention_norm_out, lp.ff_in);
        t.ff_act = Matrix(T, c.ff_dim);
        for (std::size_t i = 0; i < t.ff_pre.data.size(); ++i) t.ff_act.data[i] = gelu(t.ff_pre.data[i]);
        Matrix ff_out = dense_forward(t.ff_act, lp.ff_out);
        t.ff_output_mask = make_mask(options, c.dropout, kFirstLayerSite + 3 * l + 2, example_index, T * c.hidden);
        apply_mask(ff_out.data, t.ff_output_mask);
        for (std::size_t i = 0; i < ff_out.data.size(); ++i) ff_out.data[i] += t.attention_norm_out.data[i];
        t.output = layer_norm_rows(ff_out, lp.output_norm, c.layer_norm_eps, t.output_norm);

        if (!all_finite(t.output.data)) {
            throw NumericError("non-finite activation in encoder layer " + std::to_string(l));
        }
        x = &t.output;
    }

    // Pooler over the [CLS] position.
    const std::size_t H = c.hidden;
    tr.pooled.assign(H, 0.0);
    for (std::size_t j = 0; j < H; ++j) tr.pooled[j] = params.pooler.bias[j];
    for (std::size_t i = 0; i < H; ++i) {
        const double xv = (*x)(0, i);
        for (std::size_t j = 0; j < H; ++j) tr.pooled[j] += xv * params.pooler.weight.at(i, j);
    }
    for (auto& v : tr.pooled) v = std::tanh(v);
    tr.pooled_mask = make_mask(options, c.dropout, kPoolerSite, example_index, H);
    tr.pooled_dropped = tr.pooled;
    apply_mask(tr.pooled_dropped, tr.pooled_mask);

    tr.logits.assign(c.num_labels, 0.0);
    for (std::size_t j = 0; j < c.num_labels; ++j) {
        double z = params.classifier.bias[j];
        for (std::size_t h = 0; h < H; ++h) z += params.classifier.weight.at(j, h) * tr.pooled_dropped[h];
        tr.logits[j] = z;
    }
    if (!all_finite(tr.logits)) throw NumericError("non-finite logits");
    return tr;
}

void attention_backward(const ModelParameters& params, const LayerTrace& t, const Matrix& d_context, Matrix& d_query,
                        Matrix& d_key, Matrix& d_value) {
    const auto& c = params.config;
    const std::size_t T = t.input.rows;
    const std::size_t d = c.head_dim();
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> d_weights(T);
    for (std::size_t h = 0; h < c.heads; ++h) {
        const std::size_t off = h * d;
        const Matrix& w = t.weights[h];
        for (std::size_t i = 0; i < T; ++i) {
            // Through the context product and the dropout on the weights.
            for (std::size_t j = 0; j < T; ++j) {
                const double m = t.weight_mask.active() ? t.weight_mask.scale[(h * T + i) * T + j] : 1.0;
                double acc = 0.0;
                for (std::size_t k = 0; k < d; ++k) acc += d_context(i, off + k) * t.value(j, off + k);
                d_weights[j] = acc * m;
                const double pd = w(i, j) * m;
                if (pd != 0.0) {
                    for (std::size_t k = 0; k < d; ++k) d_value(j, off + k) += pd * d_context(i, off + k);
                }
            }
            // Softmax Jacobian.
            double dot = 0.0;
            for (std::size_t j = 0; j < T; ++j) dot += d_weights[j] * w(i, j);
            for (std::size_t j = 0; j < T; ++j) {
                const double ds = w(i, j) * (d_weights[j] - dot) * inv_sqrt_d;
                if (ds == 0.0) continue;
                for (std::size_t k = 0; k < d; ++k) {
                    d_query(i, off + k) += ds * t.key(j, off + k);
                    d_key(j, off + k) += ds * t.query(i, off + k);
                }
            }
        }
    }
}

void backward_example(const EncodedExample& ex, const ExampleTrace& tr, std::span<const double> d_logits,
                      const ModelParameters& params, ModelParameters& g) {
    const auto& c = params.config;
    const std::size_t T = ex.input_ids.size();
    const std::size_t H = c.hidden;

    // Classifier and pooler.
    std::vector<double> d_pooled(H, 0.0);
    for (std::size_t j = 0; j < c.num_labels; ++j) {
        const double dz = d_logits[j];
        g.classifier.bias[j] += dz;
        for (std::size_t h = 0; h < H; ++h) {
            g.classifier.weight.at(j, h) += dz * tr.pooled_dropped[h];
            d_pooled[h] += dz * params.classifier.weight.at(j, h);
        }
    }
    if (tr.pooled_mask.active()) {
        for (std::size_t h = 0; h < H; ++h) d_pooled[h] *= tr.pooled_mask.scale[h];
    }
    for (std::size_t h = 0; h < H; ++h) d_pooled[h] *= 1.0 - tr.pooled[h] * tr.pooled[h];

    const Matrix& last = c.layers ? tr.layers.back().output : tr.embedded;
    Matrix dy(T, H);
    for (std::size_t j = 0; j < H; ++j) g.pooler.bias[j] += d_pooled[j];
    for (std::size_t i = 0; i < H; ++i) {
        const double xv = last(0, i);
        double acc = 0.0;
        for (std::size_t j = 0; j < H; ++j) {
            g.pooler.weight.at(i, j) += xv * d_pooled[j];
            acc += params.pooler.weight.at(i, j) * d_pooled[j];
        }
        dy(0, i) = acc;
    }

    for (std::size_t l = c.layers; l-- > 0;) {
        const auto& lp = params.layers[l];
        auto& lg = g.layers[l];
        const auto& t = tr.layers[l];

        // Output sublayer.
        Matrix d_res = layer_norm_rows_backward(dy, t.output_norm, lp.output_norm, lg.output_norm);
        Matrix d_attn_norm_out = d_res;
        Matrix d_ff_out = std::move(d_res);
        apply_mask(d_ff_out.data, t.ff_output_mask);
        Matrix d_ff_act(T, c.ff_dim);
        dense_backward(t.ff_act, d_ff_out, lp.ff_out, lg.ff_out, d_ff_act);
        for (std::size_t i = 0; i < d_ff_act.data.size(); ++i) d_ff_act.data[i] *= gelu_derivative(t.ff_pre.data[i]);
        dense_backward(t.attention_norm_out, d_ff_act, lp.ff_in, lg.ff_in, d_attn_norm_out);

        // Attention sublayer.
        Matrix d_attn_res = layer_norm_rows_backward(d_attn_norm_out, t.attention_norm, lp.attention_norm,
                                                     lg.attention_norm);
        Matrix dx = d_attn_res;
        Matrix d_attn_out = std::move(d_attn_res);
        apply_mask(d_attn_out.data, t.attention_output_mask);
        Matrix d_context(T, H);
        dense_backward(t.context, d_attn_out, lp.attention_output, lg.attention_output, d_context);

        Matrix d_query(T, H), d_key(T, H), d_value(T, H);
        attention_backward(params, t, d_context, d_query, d_key, d_value);
        dense_backward(t.input, d_query, lp.query, lg.query, dx);
        dense_backward(t.input, d_key, lp.key, lg.key, dx);
        dense_backward(t.input, d_value, lp.value, lg.value, dx);
        dy = std::move(dx);
    }

    apply_mask(dy.data, tr.embedding_mask);
    Matrix d_sum = layer_norm_rows_backward(dy, tr.embedding_norm, params.embedding_norm, g.embedding_norm);
    for (std::size_t t = 0; t < T; ++t) {
        const auto id = static_cast<std::size_t>(ex.input_ids[t]);
        const std::size_t seg = ex.segment_ids[t];
        for (std::size_t h = 0; h < H; ++h) {
            const double v = d_sum(t, h);
            g.token_embedding.at(id, h) += v;
            g.position_embedding.at(t, h) += v;
            g.segment_embedding.at(seg, h) += v;
        }
    }
}

template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& body) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

double bce_cell(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_derivative(double x) {
    constexpr double inv_sqrt_2pi = 0.398942280401432677939946059934;
    const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    return cdf + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

std::vector<double> layer_norm(std::span<const double> v, std::span<const double> scale, std::span<const double> shift,
                               double eps) {
    if (v.size() < 2) throw RangeError("layer_norm needs at least two elements");
    if (scale.size() != v.size() || shift.size() != v.size()) throw SchemaError("layer_norm parameter size mismatch");
    Matrix x(1, v.size());
    std::copy(v.begin(), v.end(), x.data.begin());
    NormParams p{Tensor("scale", {v.size()}), Tensor("shift", {v.size()})};
    std::copy(scale.begin(), scale.end(), p.scale.values.begin());
    std::copy(shift.begin(), shift.end(), p.shift.values.begin());
    NormCache cache;
    return layer_norm_rows(x, p, eps, cache).data;
}

Matrix embedding_sum(const EncodedExample& ex, const ModelParameters& params) {
    const auto& c = params.config;
    check_example(ex, c);
    const std::size_t T = ex.input_ids.size();
    Matrix sum(T, c.hidden);
    for (std::size_t t = 0; t < T; ++t) {
        const auto id = static_cast<std::size_t>(ex.input_ids[t]);
        for (std::size_t h = 0; h < c.hidden; ++h) {
            sum(t, h) = params.token_embedding.at(id, h) + params.position_embedding.at(t, h) +
                        params.segment_embedding.at(ex.segment_ids[t], h);
        }
    }
    return sum;
}

Matrix embed_inputs(const EncodedExample& example, const ModelParameters& params, const ForwardOptions& options,
                    std::size_t example_index) {
    const auto& c = params.config;
    NormCache cache;
    Matrix out = layer_norm_rows(embedding_sum(example, params), params.embedding_norm, c.layer_norm_eps, cache);
    apply_mask(out.data, make_mask(options, c.dropout, kEmbeddingSite, example_index, out.data.size()));
    return out;
}

ForwardActivation encoder_forward(std::span<const EncodedExample> batch, const ModelParameters& params,
                                  const ForwardOptions& options) {
    const auto& c = params.config;
    std::vector<ExampleTrace> traces(batch.size());
    parallel_for(batch.size(), options.workers,
                 [&](std::size_t b) { traces[b] = forward_example(batch[b], params, options, b); });

    ForwardActivation act;
    act.hidden_states.resize(c.layers + 1);
    act.attention.resize(c.layers);
    act.pooled = Matrix(batch.size(), c.hidden);
    act.logits = Matrix(batch.size(), c.num_labels);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        auto& tr = traces[b];
        act.hidden_states[0].push_back(tr.embedded);
        for (std::size_t l = 0; l < c.layers; ++l) {
            act.hidden_states[l + 1].push_back(std::move(tr.layers[l].output));
            act.attention[l].push_back(std::move(tr.layers[l].weights));
        }
        std::copy(tr.pooled.begin(), tr.pooled.end(), act.pooled.row(b).begin());
        std::copy(tr.logits.begin(), tr.logits.end(), act.logits.row(b).begin());
    }
    return act;
}

Matrix classify(const Matrix& pooled, const ModelParameters& params) {
    const auto& c = params.config;
    if (pooled.cols != c.hidden) throw SchemaError("pooled width does not match hidden size");
    Matrix logits(pooled.rows, c.num_labels);
    for (std::size_t b = 0; b < pooled.rows; ++b) {
        for (std::size_t j = 0; j < c.num_labels; ++j) {
            double z = params.classifier.bias[j];
            for (std::size_t h = 0; h < c.hidden; ++h) z += params.classifier.weight.at(j, h) * pooled(b, h);
            logits(b, j) = z;
        }
    }
    return logits;
}

Matrix predict_logits(std::span<const EncodedExample> batch, const ModelParameters& params, std::size_t workers) {
    Matrix logits(batch.size(), params.config.num_labels);
    ForwardOptions options;
    parallel_for(batch.size(), workers, [&](std::size_t b) {
        const auto tr = forward_example(batch[b], params, options, b);
        std::copy(tr.logits.begin(), tr.logits.end(), logits.row(b).begin());
    });
    return logits;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double bce_with_logits(const Matrix& logits, const Matrix& targets) {
    if (logits.rows != targets.rows || logits.cols != targets.cols) {
        throw SchemaError("bce_with_logits: logits and targets shapes differ");
    }
    if (logits.data.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < logits.data.size(); ++i) total += bce_cell(logits.data[i], targets.data[i]);
    return total / static_cast<double>(logits.data.size());
}

Matrix label_matrix(std::span<const EncodedExample> batch) {
    const std::size_t width = batch.empty() ? 0 : batch.front().labels.size();
    Matrix y(batch.size(), width);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        if (batch[b].labels.size() != width) throw SchemaError("label widths differ within batch");
        for (std::size_t j = 0; j < width; ++j) y(b, j) = batch[b].labels[j] ? 1.0 : 0.0;
    }
    return y;
}

GradientResult compute_gradients(std::span<const EncodedExample> batch, const ModelParameters& params,
                                 const ForwardOptions& options) {
    const auto& c = params.config;
    if (batch.empty()) throw ConfigError("compute_gradients: empty batch");
    const std::size_t B = batch.size();
    const std::size_t L = c.num_labels;
    for (const auto& ex : batch) {
        if (ex.labels.size() != L) throw SchemaError("label width does not match num_labels");
    }
    const double cell_weight = 1.0 / static_cast<double>(B * L);

    GradientResult result;
    result.logits = Matrix(B, L);
    std::vector<ModelParameters> per_example(B);
    std::vector<double> example_loss(B, 0.0);
    parallel_for(B, options.workers, [&](std::size_t b) {
        const auto tr = forward_example(batch[b], params, options, b);
        std::vector<double> d_logits(L);
        double loss = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
            const double z = tr.logits[j];
            const double y = batch[b].labels[j] ? 1.0 : 0.0;
            loss += bce_cell(z, y);
            d_logits[j] = (sigmoid(z) - y) * cell_weight;
        }
        example_loss[b] = loss;
        std::copy(tr.logits.begin(), tr.logits.end(), result.logits.row(b).begin());
        per_example[b] = ModelParameters::zeros(c);
        backward_example(batch[b], tr, d_logits, params, per_example[b]);
    });

    // Fixed-order reduction: example 0, then 1, ...
    result.gradients = std::move(per_example[0]);
    auto total = tensor_list(result.gradients);
    for (std::size_t b = 1; b < B; ++b) {
        const auto part = tensor_list(std::as_const(per_example[b]));
        for (std::size_t t = 0; t < total.size(); ++t) {
            auto& dst = total[t]->values;
            const auto& src = part[t]->values;
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
    }
    double loss = 0.0;
    for (double v : example_loss) loss += v;
    result.loss = loss * cell_weight;
    check_finite(result.gradients, "gradient");
    return result;
}

void check_finite(const ModelParameters& tensors, std::string_view what) {
    tensors.for_each([&](const Tensor& t) {
        if (!all_finite(t.values)) throw NumericError("non-finite " + std::string(what) + " in tensor " + t.name);
    });
}

}  // namespace icdbert
