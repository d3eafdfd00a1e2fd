#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "comve/rng.hpp"
#include "comve/tensor.hpp"

namespace comve::testing {

inline double rel_error(double a, double b, double floor) {
    const double denom = std::max({std::abs(a), std::abs(b), floor});
    return std::abs(a - b) / denom;
}

struct FdOptions {
    double step = 1e-5;
    double floor = 1e-8;         // denominator floor for near-zero gradients
    double noise_floor = 1e-9;   // below this |ad - fd| is finite-difference noise
};

struct FdReport {
    double max_rel_err = 0.0;
    size_t checked = 0;
    std::string worst;
};

/// Central finite differences over every element of every parameter,
/// compared against previously captured autodiff gradients. `loss_fn` must
/// re-run the forward pass from the parameters' current values; it is called
/// under perturbed values and must not record a tape itself.
inline FdReport fd_check(std::span<Tensor> params,
                         const std::vector<std::vector<double>>& autodiff_grads,
                         const std::function<double()>& loss_fn, FdOptions options = {}) {
    FdReport report;
    for (size_t p = 0; p < params.size(); ++p) {
        std::span<double> values = params[p].mutable_values();
        for (size_t j = 0; j < values.size(); ++j) {
            const double original = values[j];
            values[j] = original + options.step;
            const double up = loss_fn();
            values[j] = original - options.step;
            const double down = loss_fn();
            values[j] = original;
            const double fd = (up - down) / (2.0 * options.step);
            const double ad = autodiff_grads[p][j];
            const double err =
                std::abs(ad - fd) <= options.noise_floor ? 0.0 : rel_error(ad, fd, options.floor);
            ++report.checked;
            if (err > report.max_rel_err) {
                report.max_rel_err = err;
                report.worst = "param " + std::to_string(p) + "[" + std::to_string(j) +
                               "] ad=" + std::to_string(autodiff_grads[p][j]) +
                               " fd=" + std::to_string(fd);
            }
        }
    }
    return report;
}

/// Captures each parameter's grad buffer (zeros when untouched).
inline std::vector<std::vector<double>> captured_grads(std::span<Tensor> params) {
    std::vector<std::vector<double>> grads;
    grads.reserve(params.size());
    for (Tensor& p : params) {
        std::span<const double> g = p.grad();
        if (g.empty())
            grads.emplace_back(p.size(), 0.0);
        else
            grads.emplace_back(g.begin(), g.end());
    }
    return grads;
}

inline std::vector<double> random_values(Rng& rng, size_t n, double lo = -1.0,
                                         double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

inline bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

} // namespace comve::testing
