// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "icdbert/model.hpp"

namespace icdbert {

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moment estimates mirror the parameter shapes.
struct AdamState {
    ModelParameters first_moment;
    ModelParameters second_moment;
    std::uint64_t step = 0;

    static AdamState for_model(const ModelConfig& config);
};

/// One bias-corrected Adam update. A non-finite gradient refuses the step and leaves
/// parameters and state untouched.
void adam_step(ModelParameters& params, const ModelParameters& grads, AdamState& state, double learning_rate,
               const AdamHyper& hyper = {});

}  // namespace icdbert
