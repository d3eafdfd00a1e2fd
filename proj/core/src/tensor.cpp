#include "comve/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace comve {

namespace detail {

struct TensorNode {
    std::vector<size_t> shape;
    std::vector<double> values;
    std::vector<double> grad; // empty until first accumulation
    bool requires_grad = false;
    uint64_t seq = 0;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backprop;
};

namespace {

std::atomic<uint64_t> g_sequence{0};
thread_local bool t_recording = true;
thread_local const std::unordered_map<const TensorNode*, std::vector<double>*>* t_sink = nullptr;

size_t shape_product(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

std::shared_ptr<TensorNode> new_node(std::vector<size_t> shape, std::vector<double> values) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->seq = g_sequence.fetch_add(1, std::memory_order_relaxed);
    return node;
}

/// Buffer a backward step accumulates into, or nullptr when the node does not
/// track gradients. Leaves registered with the active GradCollector are
/// redirected to the collector's private buffer.
double* grad_slot(TensorNode& node) {
    if (!node.requires_grad) return nullptr;
    if (t_sink != nullptr) {
        auto it = t_sink->find(&node);
        if (it != t_sink->end()) return it->second->data();
    }
    if (node.grad.empty()) node.grad.assign(node.values.size(), 0.0);
    return node.grad.data();
}

} // namespace
} // namespace detail

using detail::TensorNode;

namespace {
using detail::grad_slot;
using detail::new_node;
} // namespace

Tensor make_tensor(std::shared_ptr<TensorNode> node) { return Tensor(std::move(node)); }

std::string format_shape(const std::vector<size_t>& shape) {
    std::string out = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) out += " x ";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

// ---- Tensor handle ----

Tensor Tensor::zeros(std::vector<size_t> shape) {
    size_t n = detail::shape_product(shape);
    return make_tensor(new_node(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(std::vector<size_t> shape, double value) {
    size_t n = detail::shape_product(shape);
    return make_tensor(new_node(std::move(shape), std::vector<double>(n, value)));
}

Tensor Tensor::from(std::vector<size_t> shape, std::vector<double> values) {
    if (detail::shape_product(shape) != values.size())
        throw DimensionError("tensor: " + std::to_string(values.size()) +
                             " values do not fill shape " + format_shape(shape));
    return make_tensor(new_node(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::parameter(std::vector<size_t> shape, std::vector<double> values) {
    Tensor t = from(std::move(shape), std::move(values));
    t.node_->requires_grad = true;
    return t;
}

const std::vector<size_t>& Tensor::shape() const { return node_->shape; }
size_t Tensor::size() const { return node_->values.size(); }

size_t Tensor::rows() const { return node_->shape.at(0); }
size_t Tensor::cols() const {
    if (node_->shape.size() != 2)
        throw DimensionError("cols: tensor is not 2-D: " + format_shape(node_->shape));
    return node_->shape[1];
}

std::span<const double> Tensor::values() const { return node_->values; }
std::span<double> Tensor::mutable_values() { return node_->values; }

std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

double Tensor::item() const {
    if (size() != 1)
        throw ContractError("item: tensor is not scalar: " + format_shape(node_->shape));
    return node_->values[0];
}

double Tensor::at(size_t i) const { return node_->values.at(i); }

double Tensor::at(size_t i, size_t j) const {
    return node_->values.at(i * node_->shape.at(1) + j);
}

// ---- guards and collectors ----

NoGradGuard::NoGradGuard() : previous_(detail::t_recording) { detail::t_recording = false; }
NoGradGuard::~NoGradGuard() { detail::t_recording = previous_; }

GradCollector::GradCollector(std::span<const Tensor> leaves) {
    leaves_.reserve(leaves.size());
    buffers_.reserve(leaves.size());
    for (const Tensor& t : leaves) {
        leaves_.push_back(t.node());
        buffers_.emplace_back(t.size(), 0.0);
    }
}

// ---- op helpers ----

namespace {

bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (!detail::t_recording) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch: " + format_shape(a.shape()) +
                             " vs " + format_shape(b.shape()));
}

void attach(const std::shared_ptr<TensorNode>& result,
            std::initializer_list<const Tensor*> inputs,
            std::function<void(TensorNode&)> backprop) {
    result->requires_grad = true;
    for (const Tensor* t : inputs) result->parents.push_back(t->node_ptr());
    result->backprop = std::move(backprop);
}

} // namespace

// ---- operations ----

Tensor add(const Tensor& a, const Tensor& b) {
    const bool broadcast = a.shape().size() == 2 &&
                           ((b.shape().size() == 1 && b.shape()[0] == a.shape()[0]) ||
                            (b.shape().size() == 2 && b.shape()[0] == a.shape()[0] &&
                             b.shape()[1] == 1));
    if (!broadcast) check_same_shape("add", a, b);

    std::vector<double> out(a.values().begin(), a.values().end());
    const double* bv = b.values().data();
    if (broadcast) {
        size_t r = a.shape()[0], c = a.shape()[1];
        for (size_t i = 0; i < r; ++i) {
            double bi = bv[i];
            double* row = out.data() + i * c;
            for (size_t j = 0; j < c; ++j) row[j] += bi;
        }
    } else {
        for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    }

    auto node = new_node(a.shape(), std::move(out));
    if (should_record({&a, &b})) {
        attach(node, {&a, &b}, [broadcast](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            TensorNode& pb = *self.parents[1];
            const double* g = self.grad.data();
            if (double* ga = grad_slot(pa))
                for (size_t i = 0; i < pa.values.size(); ++i) ga[i] += g[i];
            if (double* gb = grad_slot(pb)) {
                if (broadcast) {
                    size_t r = pa.shape[0], c = pa.shape[1];
                    for (size_t i = 0; i < r; ++i) {
                        double s = 0.0;
                        const double* row = g + i * c;
                        for (size_t j = 0; j < c; ++j) s += row[j];
                        gb[i] += s;
                    }
                } else {
                    for (size_t i = 0; i < pb.values.size(); ++i) gb[i] += g[i];
                }
            }
        });
    }
    return make_tensor(node);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    std::vector<double> out(a.size());
    const double* av = a.values().data();
    const double* bv = b.values().data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];

    auto node = new_node(a.shape(), std::move(out));
    if (should_record({&a, &b})) {
        attach(node, {&a, &b}, [](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            TensorNode& pb = *self.parents[1];
            const double* g = self.grad.data();
            if (double* ga = grad_slot(pa))
                for (size_t i = 0; i < pa.values.size(); ++i) ga[i] += g[i] * pb.values[i];
            if (double* gb = grad_slot(pb))
                for (size_t i = 0; i < pb.values.size(); ++i) gb[i] += g[i] * pa.values[i];
        });
    }
    return make_tensor(node);
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.size());
    const double* av = a.values().data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;

    auto node = new_node(a.shape(), std::move(out));
    if (should_record({&a})) {
        attach(node, {&a}, [factor](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            const double* g = self.grad.data();
            if (double* ga = grad_slot(pa))
                for (size_t i = 0; i < pa.values.size(); ++i) ga[i] += g[i] * factor;
        });
    }
    return make_tensor(node);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw DimensionError("matmul: inner dimensions disagree: " + format_shape(a.shape()) +
                             " vs " + format_shape(b.shape()));
    const size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> out(m * n, 0.0);
    const double* A = a.values().data();
    const double* B = b.values().data();
    for (size_t i = 0; i < m; ++i) {
        const double* a_row = A + i * k;
        double* c_row = out.data() + i * n;
        for (size_t p = 0; p < k; ++p) {
            const double av = a_row[p];
            const double* b_row = B + p * n;
            for (size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
        }
    }

    auto node = new_node({m, n}, std::move(out));
    if (should_record({&a, &b})) {
        attach(node, {&a, &b}, [m, k, n](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            TensorNode& pb = *self.parents[1];
            const double* G = self.grad.data();
            const double* A = pa.values.data();
            const double* B = pb.values.data();
            if (double* ga = grad_slot(pa)) {
                // dA = G . B^T: rows of G dotted with rows of B
                for (size_t i = 0; i < m; ++i) {
                    const double* g_row = G + i * n;
                    double* ga_row = ga + i * k;
                    for (size_t p = 0; p < k; ++p) {
                        const double* b_row = B + p * n;
                        double s = 0.0;
                        for (size_t j = 0; j < n; ++j) s += g_row[j] * b_row[j];
                        ga_row[p] += s;
                    }
                }
            }
            if (double* gb = grad_slot(pb)) {
                // dB = A^T . G
                for (size_t i = 0; i < m; ++i) {
                    const double* g_row = G + i * n;
                    const double* a_row = A + i * k;
                    for (size_t p = 0; p < k; ++p) {
                        const double av = a_row[p];
                        double* gb_row = gb + p * n;
                        for (size_t j = 0; j < n; ++j) gb_row[j] += av * g_row[j];
                    }
                }
            }
        });
    }
    return make_tensor(node);
}

Tensor transpose(const Tensor& a) {
    if (a.shape().size() != 2)
        throw DimensionError("transpose: tensor is not 2-D: " + format_shape(a.shape()));
    const size_t r = a.shape()[0], c = a.shape()[1];
    std::vector<double> out(r * c);
    const double* av = a.values().data();
    for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];

    auto node = new_node({c, r}, std::move(out));
    if (should_record({&a})) {
        attach(node, {&a}, [r, c](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            const double* g = self.grad.data();
            if (double* ga = grad_slot(pa))
                for (size_t i = 0; i < r; ++i)
                    for (size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
        });
    }
    return make_tensor(node);
}

Tensor row_slice(const Tensor& a, size_t r0, size_t r1) {
    if (a.shape().size() != 2)
        throw DimensionError("row_slice: tensor is not 2-D: " + format_shape(a.shape()));
    if (r0 >= r1 || r1 > a.shape()[0])
        throw IndexError("row_slice: rows [" + std::to_string(r0) + ", " + std::to_string(r1) +
                         ") out of range for " + format_shape(a.shape()));
    const size_t c = a.shape()[1];
    std::vector<double> out(a.values().begin() + static_cast<long>(r0 * c),
                            a.values().begin() + static_cast<long>(r1 * c));

    auto node = new_node({r1 - r0, c}, std::move(out));
    if (should_record({&a})) {
        attach(node, {&a}, [r0, c](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            const double* g = self.grad.data();
            if (double* ga = grad_slot(pa))
                for (size_t i = 0; i < self.values.size(); ++i) ga[r0 * c + i] += g[i];
        });
    }
    return make_tensor(node);
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no parts");
    const size_t c = parts[0].shape().size() == 2 ? parts[0].shape()[1] : 0;
    size_t total_rows = 0;
    for (const Tensor& p : parts) {
        if (p.shape().size() != 2 || p.shape()[1] != c)
            throw DimensionError("concat_rows: incompatible part " + format_shape(p.shape()));
        total_rows += p.shape()[0];
    }
    std::vector<double> out;
    out.reserve(total_rows * c);
    for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());

    auto node = new_node({total_rows, c}, std::move(out));
    bool record = false;
    for (const Tensor& p : parts)
        if (p.requires_grad()) record = true;
    if (detail::t_recording && record) {
        node->requires_grad = true;
        for (const Tensor& p : parts) node->parents.push_back(p.node_ptr());
        node->backprop = [](TensorNode& self) {
            const double* g = self.grad.data();
            size_t offset = 0;
            for (auto& parent : self.parents) {
                size_t n = parent->values.size();
                if (double* gp = grad_slot(*parent))
                    for (size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
                offset += n;
            }
        };
    }
    return make_tensor(node);
}

Tensor column(const Tensor& a, size_t j) {
    if (a.shape().size() != 2)
        throw DimensionError("column: tensor is not 2-D: " + format_shape(a.shape()));
    const size_t r = a.shape()[0], c = a.shape()[1];
    if (j >= c)
        throw IndexError("column: index " + std::to_string(j) + " out of range for " +
                         format_shape(a.shape()));
    std::vector<double> out(r);
    const double* av = a.values().data();
    for (size_t i = 0; i < r; ++i) out[i] = av[i * c + j];

    auto node = new_node({r}, std::move(out));
    if (should_record({&a})) {
        attach(node, {&a}, [c, j](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            const double* g = self.grad.data();
            if (double* ga = grad_slot(pa))
                for (size_t i = 0; i < self.values.size(); ++i) ga[i * c + j] += g[i];
        });
    }
    return make_tensor(node);
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no parts");
    const size_t r = parts[0].shape()[0];
    const size_t k = parts.size();
    for (const Tensor& p : parts)
        if (p.shape().size() != 1 || p.shape()[0] != r)
            throw DimensionError("concat_cols: incompatible part " + format_shape(p.shape()));
    std::vector<double> out(r * k);
    for (size_t pidx = 0; pidx < k; ++pidx) {
        const double* pv = parts[pidx].values().data();
        for (size_t i = 0; i < r; ++i) out[i * k + pidx] = pv[i];
    }

    auto node = new_node({r, k}, std::move(out));
    bool record = false;
    for (const Tensor& p : parts)
        if (p.requires_grad()) record = true;
    if (detail::t_recording && record) {
        node->requires_grad = true;
        for (const Tensor& p : parts) node->parents.push_back(p.node_ptr());
        node->backprop = [r, k](TensorNode& self) {
            const double* g = self.grad.data();
            for (size_t pidx = 0; pidx < k; ++pidx) {
                if (double* gp = grad_slot(*self.parents[pidx]))
                    for (size_t i = 0; i < r; ++i) gp[i] += g[i * k + pidx];
            }
        };
    }
    return make_tensor(node);
}

namespace {

struct AxisSpan {
    size_t outer, len, inner;
};

AxisSpan axis_span(const std::vector<size_t>& shape, size_t axis) {
    if (axis >= shape.size())
        throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                             format_shape(shape));
    AxisSpan s{1, shape[axis], 1};
    for (size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    for (size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    if (s.len == 0) throw DimensionError("softmax: empty axis");
    return s;
}

} // namespace

Tensor softmax(const Tensor& a, size_t axis) {
    const AxisSpan sp = axis_span(a.shape(), axis);
    std::vector<double> out(a.size());
    const double* av = a.values().data();
    std::vector<double> scratch(sp.len);
    for (size_t o = 0; o < sp.outer; ++o) {
        for (size_t i = 0; i < sp.inner; ++i) {
            const size_t base = o * sp.len * sp.inner + i;
            double mx = av[base];
            for (size_t t = 1; t < sp.len; ++t) mx = std::max(mx, av[base + t * sp.inner]);
            for (size_t t = 0; t < sp.len; ++t) {
                double e = std::exp(av[base + t * sp.inner] - mx);
                out[base + t * sp.inner] = e;
                scratch[t] = e;
            }
            // Sum in value order so any permutation of the slice yields the
            // same denominator bit-for-bit.
            std::sort(scratch.begin(), scratch.end());
            double denom = 0.0;
            for (double e : scratch) denom += e;
            for (size_t t = 0; t < sp.len; ++t) out[base + t * sp.inner] /= denom;
        }
    }

    auto node = new_node(a.shape(), std::move(out));
    if (should_record({&a})) {
        attach(node, {&a}, [sp](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            const double* g = self.grad.data();
            const double* s = self.values.data();
            if (double* ga = grad_slot(pa)) {
                for (size_t o = 0; o < sp.outer; ++o) {
                    for (size_t i = 0; i < sp.inner; ++i) {
                        const size_t base = o * sp.len * sp.inner + i;
                        double dacc = 0.0;
                        for (size_t t = 0; t < sp.len; ++t) {
                            const size_t idx = base + t * sp.inner;
                            dacc += g[idx] * s[idx];
                        }
                        for (size_t t = 0; t < sp.len; ++t) {
                            const size_t idx = base + t * sp.inner;
                            ga[idx] += s[idx] * (g[idx] - dacc);
                        }
                    }
                }
            }
        });
    }
    return make_tensor(node);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    const size_t d = x.shape()[0];
    if (d < 2)
        throw DimensionError("layer_norm: degenerate input, needs >= 2 rows, got " +
                             format_shape(x.shape()));
    const size_t n = x.shape().size() == 2 ? x.shape()[1] : 1;
    if (gain.shape() != std::vector<size_t>{d} || bias.shape() != std::vector<size_t>{d})
        throw DimensionError("layer_norm: gain/bias must be [" + std::to_string(d) + "], got " +
                             format_shape(gain.shape()) + " and " + format_shape(bias.shape()));
    constexpr double kEps = 1e-12;

    std::vector<double> out(x.size());
    const double* xv = x.values().data();
    const double* gv = gain.values().data();
    const double* bv = bias.values().data();
    for (size_t c = 0; c < n; ++c) {
        double mean = 0.0;
        for (size_t i = 0; i < d; ++i) mean += xv[i * n + c];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (size_t i = 0; i < d; ++i) {
            double dx = xv[i * n + c] - mean;
            var += dx * dx;
        }
        var /= static_cast<double>(d);
        double inv = 1.0 / std::sqrt(var + kEps);
        for (size_t i = 0; i < d; ++i)
            out[i * n + c] = gv[i] * ((xv[i * n + c] - mean) * inv) + bv[i];
    }

    auto node = new_node(x.shape(), std::move(out));
    if (should_record({&x, &gain, &bias})) {
        attach(node, {&x, &gain, &bias}, [d, n](TensorNode& self) {
            TensorNode& px = *self.parents[0];
            TensorNode& pg = *self.parents[1];
            TensorNode& pb = *self.parents[2];
            const double* g = self.grad.data();
            const double* xv = px.values.data();
            const double* gv = pg.values.data();
            double* gx = grad_slot(px);
            double* gg = grad_slot(pg);
            double* gb = grad_slot(pb);
            std::vector<double> xhat(d), h(d);
            for (size_t c = 0; c < n; ++c) {
                double mean = 0.0;
                for (size_t i = 0; i < d; ++i) mean += xv[i * n + c];
                mean /= static_cast<double>(d);
                double var = 0.0;
                for (size_t i = 0; i < d; ++i) {
                    double dx = xv[i * n + c] - mean;
                    var += dx * dx;
                }
                var /= static_cast<double>(d);
                double inv = 1.0 / std::sqrt(var + 1e-12);
                for (size_t i = 0; i < d; ++i) xhat[i] = (xv[i * n + c] - mean) * inv;

                if (gg)
                    for (size_t i = 0; i < d; ++i) gg[i] += g[i * n + c] * xhat[i];
                if (gb)
                    for (size_t i = 0; i < d; ++i) gb[i] += g[i * n + c];
                if (gx) {
                    double mean_h = 0.0, mean_hx = 0.0;
                    for (size_t i = 0; i < d; ++i) {
                        h[i] = g[i * n + c] * gv[i];
                        mean_h += h[i];
                        mean_hx += h[i] * xhat[i];
                    }
                    mean_h /= static_cast<double>(d);
                    mean_hx /= static_cast<double>(d);
                    for (size_t i = 0; i < d; ++i)
                        gx[i * n + c] += inv * (h[i] - mean_h - xhat[i] * mean_hx);
                }
            }
        });
    }
    return make_tensor(node);
}

namespace {
constexpr double kGeluScale = 0.7978845608028653558798921198687; // sqrt(2/pi)
constexpr double kGeluCubic = 0.044715;
} // namespace

Tensor gelu(const Tensor& a) {
    std::vector<double> out(a.size());
    const double* av = a.values().data();
    for (size_t i = 0; i < out.size(); ++i) {
        double x = av[i];
        double u = kGeluScale * (x + kGeluCubic * x * x * x);
        out[i] = 0.5 * x * (1.0 + std::tanh(u));
    }

    auto node = new_node(a.shape(), std::move(out));
    if (should_record({&a})) {
        attach(node, {&a}, [](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            const double* g = self.grad.data();
            if (double* ga = grad_slot(pa)) {
                for (size_t i = 0; i < pa.values.size(); ++i) {
                    double x = pa.values[i];
                    double u = kGeluScale * (x + kGeluCubic * x * x * x);
                    double t = std::tanh(u);
                    double du = kGeluScale * (1.0 + 3.0 * kGeluCubic * x * x);
                    double deriv = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
                    ga[i] += g[i] * deriv;
                }
            }
        });
    }
    return make_tensor(node);
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
    if (table.shape().size() != 2)
        throw DimensionError("embedding_lookup: table is not 2-D: " + format_shape(table.shape()));
    const size_t v = table.shape()[0], e = table.shape()[1];
    const size_t n = ids.size();
    for (int id : ids)
        if (id < 0 || static_cast<size_t>(id) >= v)
            throw IndexError("embedding_lookup: id " + std::to_string(id) +
                             " out of range for table " + format_shape(table.shape()));
    std::vector<double> out(e * n);
    const double* tv = table.values().data();
    for (size_t t = 0; t < n; ++t) {
        const double* row = tv + static_cast<size_t>(ids[t]) * e;
        for (size_t j = 0; j < e; ++j) out[j * n + t] = row[j];
    }

    auto node = new_node({e, n}, std::move(out));
    if (should_record({&table})) {
        std::vector<int> ids_copy(ids.begin(), ids.end());
        attach(node, {&table}, [e, n, ids_copy = std::move(ids_copy)](TensorNode& self) {
            TensorNode& pt = *self.parents[0];
            const double* g = self.grad.data();
            if (double* gt = grad_slot(pt)) {
                for (size_t t = 0; t < n; ++t) {
                    double* row = gt + static_cast<size_t>(ids_copy[t]) * e;
                    for (size_t j = 0; j < e; ++j) row[j] += g[j * n + t];
                }
            }
        });
    }
    return make_tensor(node);
}

Tensor dot(const Tensor& a, const Tensor& b) {
    check_same_shape("dot", a, b);
    double s = 0.0;
    const double* av = a.values().data();
    const double* bv = b.values().data();
    for (size_t i = 0; i < a.size(); ++i) s += av[i] * bv[i];

    auto node = new_node({1}, {s});
    if (should_record({&a, &b})) {
        attach(node, {&a, &b}, [](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            TensorNode& pb = *self.parents[1];
            const double g0 = self.grad[0];
            if (double* ga = grad_slot(pa))
                for (size_t i = 0; i < pa.values.size(); ++i) ga[i] += g0 * pb.values[i];
            if (double* gb = grad_slot(pb))
                for (size_t i = 0; i < pb.values.size(); ++i) gb[i] += g0 * pa.values[i];
        });
    }
    return make_tensor(node);
}

Tensor reshape(const Tensor& a, std::vector<size_t> shape) {
    if (detail::shape_product(shape) != a.size())
        throw DimensionError("reshape: " + format_shape(a.shape()) + " does not hold " +
                             format_shape(shape));
    std::vector<double> out(a.values().begin(), a.values().end());
    auto node = new_node(std::move(shape), std::move(out));
    if (should_record({&a})) {
        attach(node, {&a}, [](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            const double* g = self.grad.data();
            if (double* ga = grad_slot(pa))
                for (size_t i = 0; i < pa.values.size(); ++i) ga[i] += g[i];
        });
    }
    return make_tensor(node);
}

Tensor stack_scalars(std::span<const Tensor> parts) {
    if (parts.empty()) throw DimensionError("stack_scalars: no parts");
    std::vector<double> out(parts.size());
    for (size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].size() != 1)
            throw DimensionError("stack_scalars: part " + std::to_string(i) + " is not scalar: " +
                                 format_shape(parts[i].shape()));
        out[i] = parts[i].values()[0];
    }

    auto node = new_node({parts.size()}, std::move(out));
    bool record = false;
    for (const Tensor& p : parts)
        if (p.requires_grad()) record = true;
    if (detail::t_recording && record) {
        node->requires_grad = true;
        for (const Tensor& p : parts) node->parents.push_back(p.node_ptr());
        node->backprop = [](TensorNode& self) {
            for (size_t i = 0; i < self.parents.size(); ++i)
                if (double* gp = grad_slot(*self.parents[i])) gp[0] += self.grad[i];
        };
    }
    return make_tensor(node);
}

Tensor cross_entropy(const Tensor& probabilities, size_t label) {
    if (probabilities.shape().size() != 1)
        throw DimensionError("cross_entropy: probabilities must be 1-D, got " +
                             format_shape(probabilities.shape()));
    const size_t c = probabilities.size();
    if (label >= c)
        throw IndexError("cross_entropy: label " + std::to_string(label) +
                         " out of range for " + std::to_string(c) + " classes");
    double total = 0.0;
    for (double p : probabilities.values()) {
        if (p <= 0.0)
            throw ContractError("cross_entropy: probabilities must be positive");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6)
        throw ContractError("cross_entropy: probabilities sum to " + std::to_string(total) +
                            ", expected 1 within 1e-6");

    auto node = new_node({1}, {-std::log(probabilities.values()[label])});
    if (should_record({&probabilities})) {
        attach(node, {&probabilities}, [label](TensorNode& self) {
            TensorNode& pp = *self.parents[0];
            if (double* gp = grad_slot(pp))
                gp[label] += -self.grad[0] / pp.values[label];
        });
    }
    return make_tensor(node);
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    auto node = new_node({1}, {s});
    if (should_record({&a})) {
        attach(node, {&a}, [](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            const double g0 = self.grad[0];
            if (double* ga = grad_slot(pa))
                for (size_t i = 0; i < pa.values.size(); ++i) ga[i] += g0;
        });
    }
    return make_tensor(node);
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
    if (rate == 0.0) return x;
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(x.size());
    for (double& m : mask) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
    return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

// ---- backward sweep ----

namespace {

void run_backward(TensorNode* root) {
    if (root->values.size() != 1)
        throw ContractError("backward: loss is not scalar: " + format_shape(root->shape));
    if (!root->requires_grad)
        throw ContractError("backward: loss is not connected to the tape");

    // Gather every reachable gradient-tracking node.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<TensorNode*> stack{root};
    seen.insert(root);
    while (!stack.empty()) {
        TensorNode* node = stack.back();
        stack.pop_back();
        order.push_back(node);
        for (auto& parent : node->parents) {
            if (parent->requires_grad && seen.insert(parent.get()).second)
                stack.push_back(parent.get());
        }
    }
    // Creation order is a topological order: every consumer of a node was
    // created after it, so a descending sweep visits consumers first.
    std::sort(order.begin(), order.end(),
              [](const TensorNode* a, const TensorNode* b) { return a->seq > b->seq; });

    // Non-leaf buffers hold per-sweep contributions; leaves keep accumulating
    // across sweeps until zero_grad.
    for (TensorNode* node : order)
        if (node->backprop) std::fill(node->grad.begin(), node->grad.end(), 0.0);

    if (double* g = grad_slot(*root)) g[0] += 1.0;
    for (TensorNode* node : order) {
        if (!node->backprop) continue;
        if (node->grad.empty()) continue; // no contribution reached this node
        node->backprop(*node);
    }
}

} // namespace

void backward(const Tensor& loss) { run_backward(loss.node()); }

void backward_into(const Tensor& loss, GradCollector& collector) {
    std::unordered_map<const TensorNode*, std::vector<double>*> sink;
    sink.reserve(collector.size());
    for (size_t i = 0; i < collector.size(); ++i)
        sink.emplace(collector.leaf(i), &collector.grads()[i]);
    detail::t_sink = &sink;
    try {
        run_backward(loss.node());
    } catch (...) {
        detail::t_sink = nullptr;
        throw;
    }
    detail::t_sink = nullptr;
}

} // namespace comve
