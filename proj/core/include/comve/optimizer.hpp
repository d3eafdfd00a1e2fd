#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "comve/tensor.hpp"

namespace comve {

struct AdamWConfig {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

/// Per-parameter first/second moment buffers plus the step counter.
struct AdamWState {
    AdamWConfig config;
    uint64_t step_count = 0;
    std::vector<std::vector<double>> moment1;
    std::vector<std::vector<double>> moment2;
};

AdamWState init_adamw(std::span<const Tensor> params, AdamWConfig config);

/// One decoupled-weight-decay Adam update, in place, with bias-corrected
/// moments. Gradients are taken from the tensors' grad buffers (missing
/// buffer means zero gradient).
void adamw_step(std::span<Tensor> params, AdamWState& state);

/// Same update with explicit gradient buffers aligned to `params`.
void adamw_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
                AdamWState& state);

} // namespace comve
