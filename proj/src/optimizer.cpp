// SPDX-License-Identifier: Apache-2.0
#include "icdbert/optimizer.hpp"

#include <cmath>

#include "icdbert/encoder.hpp"
#include "icdbert/error.hpp"

namespace icdbert {

AdamState AdamState::for_model(const ModelConfig& config) {
    return AdamState{ModelParameters::zeros(config), ModelParameters::zeros(config), 0};
}

void adam_step(ModelParameters& params, const ModelParameters& grads, AdamState& state, double learning_rate,
               const AdamHyper& hyper) {
    check_finite(grads, "gradient (Adam step refused)");
    auto p = tensor_list(params);
    const auto g = tensor_list(grads);
    auto m = tensor_list(state.first_moment);
    auto v = tensor_list(state.second_moment);
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
        throw SchemaError("adam_step: parameter, gradient and moment layouts differ");
    }
    for (std::size_t t = 0; t < p.size(); ++t) {
        if (g[t]->size() != p[t]->size() || m[t]->size() != p[t]->size() || v[t]->size() != p[t]->size()) {
            throw SchemaError("adam_step: shape mismatch in tensor " + p[t]->name);
        }
    }

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(hyper.beta1, t);
    const double correction2 = 1.0 - std::pow(hyper.beta2, t);
    for (std::size_t k = 0; k < p.size(); ++k) {
        auto& theta = p[k]->values;
        const auto& grad = g[k]->values;
        auto& m1 = m[k]->values;
        auto& m2 = v[k]->values;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m1[i] = hyper.beta1 * m1[i] + (1.0 - hyper.beta1) * grad[i];
            m2[i] = hyper.beta2 * m2[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
            const double m_hat = m1[i] / correction1;
            const double v_hat = m2[i] / correction2;
            theta[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
        }
    }
}

}  // namespace icdbert
