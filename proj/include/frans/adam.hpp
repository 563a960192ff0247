#pragma once

#include <cstdint>
#include <vector>

#include "frans/layers.hpp"

namespace frans {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
};

/// One bias-corrected Adam update of every parameter from its stored gradient.
/// Throws before touching any weight if a gradient is non-finite or shapes disagree.
void adam_step(const std::vector<Param*>& params, AdamState& state);

}  // namespace frans
