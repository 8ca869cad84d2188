#pragma once

#include <cstdint>
#include <vector>

#include "sketchfit/common.hpp"

namespace sketchfit {

// Bias-corrected Adam. State is owned by whoever drives the updates.
struct AdamState {
    int64_t t = 0;
    std::vector<double> m, v;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One update step; allocates the moment buffers on first use.
// Throws numeric_error on non-finite gradients.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, double lr);

}  // namespace sketchfit
