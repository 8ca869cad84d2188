#include "sketchfit/adam.hpp"

#include <cmath>

#include "sketchfit/kernels.hpp"

namespace sketchfit {

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, double lr) {
    if (grads.size() != params.size())
        throw shape_error("gradient size does not match parameters");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size())
        throw shape_error("optimizer state size does not match parameters");
    for (double g : grads)
        if (!std::isfinite(g)) throw numeric_error("non-finite gradient in adam_step");

    state.t += 1;
    kernels::AdamConsts c;
    c.lr = lr;
    c.beta1 = state.beta1;
    c.beta2 = state.beta2;
    c.eps = state.eps;
    c.bias1 = 1.0 - std::pow(state.beta1, double(state.t));
    c.bias2 = 1.0 - std::pow(state.beta2, double(state.t));
    kernels::active().adam_update(params.data(), grads.data(), state.m.data(),
                                  state.v.data(), params.size(), c);
}

}  // namespace sketchfit
