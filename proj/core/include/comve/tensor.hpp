#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "comve/errors.hpp"
#include "comve/rng.hpp"

namespace comve {

namespace detail {
struct TensorNode;
}

/// Dense 64-bit float tensor, row-major, with reverse-mode autodiff.
///
/// A Tensor is a cheap handle onto a node of the computation tape. Values are
/// immutable once created except through mutable_values() (used by the
/// optimizer and by finite-difference probes); gradient buffers accumulate
/// across backward() calls until zero_grad().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<size_t> shape);
    static Tensor full(std::vector<size_t> shape, double value);
    static Tensor from(std::vector<size_t> shape, std::vector<double> values);
    static Tensor scalar(double value);
    /// Leaf tensor tracked by autodiff (requires_grad = true).
    static Tensor parameter(std::vector<size_t> shape, std::vector<double> values);

    bool defined() const noexcept { return node_ != nullptr; }
    const std::vector<size_t>& shape() const;
    size_t size() const;
    size_t rows() const;
    size_t cols() const;

    std::span<const double> values() const;
    std::span<double> mutable_values();

    /// Gradient buffer; empty span until backward() has touched this tensor.
    std::span<const double> grad() const;
    void zero_grad();
    bool requires_grad() const;

    /// Value of a scalar (size-1) tensor.
    double item() const;
    double at(size_t i) const;
    double at(size_t i, size_t j) const;

    detail::TensorNode* node() const noexcept { return node_.get(); }
    const std::shared_ptr<detail::TensorNode>& node_ptr() const noexcept { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::TensorNode> node_;

    friend Tensor make_tensor(std::shared_ptr<detail::TensorNode>);
};

/// Disables tape recording for its scope (thread-local). Forward passes made
/// under the guard produce constant tensors.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Collects leaf gradients of one backward pass into private buffers instead
/// of the leaves' shared grad storage. Lets many tapes over the same
/// parameters run on different threads at once.
class GradCollector {
public:
    explicit GradCollector(std::span<const Tensor> leaves);

    /// Buffers aligned with the constructor's leaf order.
    std::vector<std::vector<double>>& grads() { return buffers_; }
    const detail::TensorNode* leaf(size_t i) const { return leaves_[i]; }
    size_t size() const { return leaves_.size(); }

private:
    std::vector<const detail::TensorNode*> leaves_;
    std::vector<std::vector<double>> buffers_;

    friend void backward_into(const Tensor&, GradCollector&);
};

// ---- primitive operations (forward + recorded backward) ----

/// a + b. Shapes must match, or b may be a length-r vector broadcast across
/// the columns of an r x c matrix a.
Tensor add(const Tensor& a, const Tensor& b);
/// Elementwise product, shapes must match.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// [m x k] . [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// Rows [r0, r1) of a matrix.
Tensor row_slice(const Tensor& a, size_t r0, size_t r1);
Tensor concat_rows(std::span<const Tensor> parts);
/// Column j of a matrix as a length-r vector.
Tensor column(const Tensor& a, size_t j);
/// Length-r vectors glued into an [r x k] matrix.
Tensor concat_cols(std::span<const Tensor> parts);
/// Numerically stable softmax along `axis`. The denominator is summed in
/// value order, so outputs are invariant to slice permutation bit-for-bit.
Tensor softmax(const Tensor& a, size_t axis = 0);
/// Zero-mean unit-variance normalization along axis 0 (per column for
/// matrices), eps = 1e-12 inside the root, followed by gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
/// 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& a);
/// Rows of `table` [V x e] gathered by token id into an [e x n] matrix
/// (one column per position).
Tensor embedding_lookup(const Tensor& table, std::span<const int> ids);
Tensor dot(const Tensor& a, const Tensor& b);
/// Same values, new shape of equal element count.
Tensor reshape(const Tensor& a, std::vector<size_t> shape);
Tensor stack_scalars(std::span<const Tensor> parts);
/// -log p[label]. `probabilities` must be positive and sum to 1 within 1e-6.
Tensor cross_entropy(const Tensor& probabilities, size_t label);
Tensor sum(const Tensor& a);
/// Inverted-scale dropout; identity when rate == 0. The mask is a constant.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

/// Reverse-mode sweep from a scalar loss. Visits recorded nodes in reverse
/// creation order and accumulates into grad buffers.
void backward(const Tensor& loss);
/// Same sweep, but gradients of the collector's leaves land in the collector.
void backward_into(const Tensor& loss, GradCollector& collector);

std::string format_shape(const std::vector<size_t>& shape);

} // namespace comve
