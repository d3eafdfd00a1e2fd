#include "comve/optimizer.hpp"

#include <cmath>

namespace comve {

AdamWState init_adamw(std::span<const Tensor> params, AdamWConfig config) {
    AdamWState state;
    state.config = config;
    state.moment1.reserve(params.size());
    state.moment2.reserve(params.size());
    for (const Tensor& p : params) {
        state.moment1.emplace_back(p.size(), 0.0);
        state.moment2.emplace_back(p.size(), 0.0);
    }
    return state;
}

namespace {

void check_aligned(std::span<Tensor> params, const AdamWState& state) {
    if (params.size() != state.moment1.size())
        throw DimensionError("adamw_step: state tracks " + std::to_string(state.moment1.size()) +
                             " parameters, got " + std::to_string(params.size()));
    for (size_t i = 0; i < params.size(); ++i)
        if (params[i].size() != state.moment1[i].size())
            throw DimensionError("adamw_step: parameter " + std::to_string(i) + " has " +
                                 std::to_string(params[i].size()) + " values, state has " +
                                 std::to_string(state.moment1[i].size()));
}

void apply(std::span<Tensor> params,
           const std::function<const double*(size_t)>& grad_of, AdamWState& state) {
    check_aligned(params, state);
    state.step_count += 1;
    const AdamWConfig& c = state.config;
    const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
    const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));

    for (size_t i = 0; i < params.size(); ++i) {
        std::span<double> values = params[i].mutable_values();
        const double* g = grad_of(i);
        double* m = state.moment1[i].data();
        double* v = state.moment2[i].data();
        for (size_t j = 0; j < values.size(); ++j) {
            const double gj = g == nullptr ? 0.0 : g[j];
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
            const double m_hat = m[j] / bias1;
            const double v_hat = v[j] / bias2;
            values[j] -= c.learning_rate * (m_hat / (std::sqrt(v_hat) + c.epsilon) +
                                            c.weight_decay * values[j]);
        }
    }
}

} // namespace

void adamw_step(std::span<Tensor> params, AdamWState& state) {
    apply(params,
          [&](size_t i) -> const double* {
              std::span<const double> g = params[i].grad();
              return g.empty() ? nullptr : g.data();
          },
          state);
}

void adamw_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
                AdamWState& state) {
    if (grads.size() != params.size())
        throw DimensionError("adamw_step: " + std::to_string(grads.size()) + " gradients for " +
                             std::to_string(params.size()) + " parameters");
    for (size_t i = 0; i < params.size(); ++i)
        if (grads[i].size() != params[i].size())
            throw DimensionError("adamw_step: gradient " + std::to_string(i) + " has " +
                                 std::to_string(grads[i].size()) + " values, parameter has " +
                                 std::to_string(params[i].size()));
    apply(params, [&](size_t i) { return grads[i].data(); }, state);
}

} // namespace comve
