#pragma once

// Dense row-major tensors with reverse-mode automatic differentiation and
// the Adam optimizer. The scalar type is a template parameter: float for
// training, double for finite-difference verification.
//
// Forward ops build a dynamic graph of shared nodes; backward() walks it in
// reverse topological order exactly once. Leaf gradients (Parameters)
// accumulate across calls until the optimizer consumes them; intermediate
// gradients are reset per backward call. All loops run in a fixed order so
// results are reproducible bit-for-bit.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace sbae {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
    os << "]";
    return os.str();
}

// Deterministic seeded random source shared by init, shuffling and dropout.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }

    double normal(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(gen_);
    }

    std::uint64_t next_u64() { return gen_(); }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), std::size_t{0});
        std::shuffle(p.begin(), p.end(), gen_);
        return p;
    }

  private:
    std::mt19937_64 gen_;
};

namespace detail {

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty until needed
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backprop;  // reads this->grad, accumulates into parents

    std::size_t numel() const { return value.size(); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

template <typename T>
inline void debug_check_finite(const Node<T>& n, const char* op) {
#ifndef NDEBUG
    for (const T v : n.value) {
        if (!std::isfinite(static_cast<double>(v))) {
            throw std::runtime_error(std::string("non-finite value produced by ") + op);
        }
    }
#else
    (void)n;
    (void)op;
#endif
}

}  // namespace detail

template <typename T>
class Tensor {
  public:
    using NodePtr = std::shared_ptr<detail::Node<T>>;

    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape) { return full(std::move(shape), T(0)); }

    static Tensor full(Shape shape, T v) {
        auto n = std::make_shared<detail::Node<T>>();
        n->value.assign(shape_numel(shape), v);
        n->shape = std::move(shape);
        return Tensor(std::move(n));
    }

    static Tensor from_vector(Shape shape, std::vector<T> data) {
        if (shape_numel(shape) != data.size()) {
            throw std::invalid_argument("tensor data size " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(shape));
        }
        auto n = std::make_shared<detail::Node<T>>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        return Tensor(std::move(n));
    }

    static Tensor scalar(T v) { return from_vector({1}, {v}); }

    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->numel(); }
    const std::vector<T>& data() const { return node_->value; }
    std::vector<T>& mutable_data() { return node_->value; }
    T item() const {
        if (numel() != 1) throw std::runtime_error("item() on non-scalar tensor");
        return node_->value[0];
    }

    void set_requires_grad(bool b = true) {
        node_->requires_grad = b;
        if (b) node_->ensure_grad();
    }
    bool requires_grad() const { return node_ && node_->requires_grad; }

    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

    NodePtr node() const { return node_; }
    bool defined() const { return node_ != nullptr; }

  private:
    NodePtr node_;
};

namespace detail {

template <typename T>
inline std::shared_ptr<Node<T>> make_result(Shape shape,
                                            std::vector<std::shared_ptr<Node<T>>> parents) {
    auto out = std::make_shared<Node<T>>();
    out->value.assign(shape_numel(shape), T(0));
    out->shape = std::move(shape);
    for (const auto& p : parents) {
        if (p->requires_grad) out->requires_grad = true;
    }
    if (out->requires_grad) out->parents = std::move(parents);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

// Accumulates dLoss/dNode into every reachable gradient-requiring node.
// Leaf gradients accumulate across calls; interior gradients are scoped to
// one call.
template <typename T>
inline void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) {
        throw std::runtime_error("backward() requires a scalar, got shape " +
                                 shape_str(loss.shape()));
    }
    auto root = loss.node();
    if (!root->requires_grad) return;

    // iterative post-order DFS -> topological order
    std::vector<detail::Node<T>*> topo;
    std::unordered_set<detail::Node<T>*> seen;
    struct Frame {
        detail::Node<T>* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            detail::Node<T>* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            topo.push_back(f.node);
            stack.pop_back();
        }
    }

    for (auto* n : topo) {
        if (n->backprop) {
            n->grad.assign(n->value.size(), T(0));  // interior: fresh per call
        } else {
            n->ensure_grad();  // leaf: accumulate
        }
    }
    root->grad[0] += T(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop();
    }
}

// ---------------------------------------------------------------------------
// elementwise and broadcast ops
// ---------------------------------------------------------------------------

template <typename T>
inline Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    auto an = a.node();
    auto bn = b.node();
    const bool same = an->shape == bn->shape;
    const bool bias = !same && bn->shape.size() == 1 && !an->shape.empty() &&
                      bn->shape[0] == an->shape.back();
    if (!same && !bias) {
        throw std::invalid_argument("add: incompatible shapes " + shape_str(an->shape) + " and " +
                                    shape_str(bn->shape));
    }
    auto out = detail::make_result<T>(an->shape, {an, bn});
    const std::size_t n = an->numel();
    if (same) {
        for (std::size_t i = 0; i < n; ++i) out->value[i] = an->value[i] + bn->value[i];
    } else {
        const std::size_t d = bn->shape[0];
        for (std::size_t i = 0; i < n; ++i) out->value[i] = an->value[i] + bn->value[i % d];
    }
    detail::debug_check_finite(*out, "add");
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [an, bn, o, same, n]() {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) an->grad[i] += o->grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                if (same) {
                    for (std::size_t i = 0; i < n; ++i) bn->grad[i] += o->grad[i];
                } else {
                    const std::size_t d = bn->shape[0];
                    for (std::size_t i = 0; i < n; ++i) bn->grad[i % d] += o->grad[i];
                }
            }
        };
    }
    return Tensor<T>(out);
}

template <typename T>
inline Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    auto an = a.node();
    auto bn = b.node();
    if (an->shape != bn->shape) {
        throw std::invalid_argument("mul: incompatible shapes " + shape_str(an->shape) + " and " +
                                    shape_str(bn->shape));
    }
    auto out = detail::make_result<T>(an->shape, {an, bn});
    const std::size_t n = an->numel();
    for (std::size_t i = 0; i < n; ++i) out->value[i] = an->value[i] * bn->value[i];
    detail::debug_check_finite(*out, "mul");
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [an, bn, o, n]() {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) an->grad[i] += o->grad[i] * bn->value[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) bn->grad[i] += o->grad[i] * an->value[i];
            }
        };
    }
    return Tensor<T>(out);
}

template <typename T>
inline Tensor<T> scale(const Tensor<T>& a, T c) {
    auto an = a.node();
    auto out = detail::make_result<T>(an->shape, {an});
    const std::size_t n = an->numel();
    for (std::size_t i = 0; i < n; ++i) out->value[i] = an->value[i] * c;
    detail::debug_check_finite(*out, "scale");
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [an, o, c, n]() {
            an->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) an->grad[i] += o->grad[i] * c;
        };
    }
    return Tensor<T>(out);
}

template <typename T>
inline Tensor<T> sum(const Tensor<T>& a) {
    auto an = a.node();
    auto out = detail::make_result<T>({1}, {an});
    T acc = T(0);
    for (const T v : an->value) acc += v;
    out->value[0] = acc;
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [an, o]() {
            an->ensure_grad();
            const T g = o->grad[0];
            for (auto& gi : an->grad) gi += g;
        };
    }
    return Tensor<T>(out);
}

// ---------------------------------------------------------------------------
// matmul and layout ops
// ---------------------------------------------------------------------------

namespace detail {

// y[n,p] += a[n,k] * b[k,p]  (ikj loop order, fixed reduction order)
template <typename T>
inline void gemm_acc(const T* a, const T* b, T* y, std::size_t n, std::size_t k, std::size_t p) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T av = a[i * k + kk];
            if (av == T(0)) continue;
            const T* brow = b + kk * p;
            T* yrow = y + i * p;
            for (std::size_t j = 0; j < p; ++j) yrow[j] += av * brow[j];
        }
    }
}

// y[n,p] += a[n,k] * b[p,k]^T
template <typename T>
inline void gemm_bt_acc(const T* a, const T* b, T* y, std::size_t n, std::size_t k,
                        std::size_t p) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            T acc = T(0);
            const T* arow = a + i * k;
            const T* brow = b + j * k;
            for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            y[i * p + j] += acc;
        }
    }
}

// y[k,p] += a[n,k]^T * b[n,p]
template <typename T>
inline void gemm_at_acc(const T* a, const T* b, T* y, std::size_t n, std::size_t k,
                        std::size_t p) {
    for (std::size_t i = 0; i < n; ++i) {
        const T* arow = a + i * k;
        const T* brow = b + i * p;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T av = arow[kk];
            if (av == T(0)) continue;
            T* yrow = y + kk * p;
            for (std::size_t j = 0; j < p; ++j) yrow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

// Batched matrix product a[..,n,k] x b[..,k,p]. Batch dimensions must match,
// or b may be a plain matrix shared across the batch.
template <typename T>
inline Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    auto an = a.node();
    auto bn = b.node();
    const Shape& as = an->shape;
    const Shape& bs = bn->shape;
    if (as.size() < 2 || bs.size() < 2) {
        throw std::invalid_argument("matmul: need rank >= 2, got " + shape_str(as) + " and " +
                                    shape_str(bs));
    }
    const std::size_t n = as[as.size() - 2];
    const std::size_t k = as[as.size() - 1];
    const std::size_t kb = bs[bs.size() - 2];
    const std::size_t p = bs[bs.size() - 1];
    const bool shared_b = bs.size() == 2 && as.size() > 2;
    const bool batch_match =
        bs.size() == as.size() && std::equal(as.begin(), as.end() - 2, bs.begin());
    if (k != kb || !(shared_b || batch_match || as.size() == 2)) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(as) + " and " +
                                    shape_str(bs));
    }
    std::size_t batch = 1;
    for (std::size_t i = 0; i + 2 < as.size(); ++i) batch *= as[i];

    Shape os(as.begin(), as.end() - 2);
    os.push_back(n);
    os.push_back(p);
    auto out = detail::make_result<T>(os, {an, bn});
    for (std::size_t bi = 0; bi < batch; ++bi) {
        const T* ap = an->value.data() + bi * n * k;
        const T* bp = bn->value.data() + (shared_b ? 0 : bi * k * p);
        detail::gemm_acc(ap, bp, out->value.data() + bi * n * p, n, k, p);
    }
    detail::debug_check_finite(*out, "matmul");
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [an, bn, o, n, k, p, batch, shared_b]() {
            for (std::size_t bi = 0; bi < batch; ++bi) {
                const T* gy = o->grad.data() + bi * n * p;
                const T* ap = an->value.data() + bi * n * k;
                const T* bp = bn->value.data() + (shared_b ? 0 : bi * k * p);
                if (an->requires_grad) {
                    an->ensure_grad();
                    detail::gemm_bt_acc(gy, bp, an->grad.data() + bi * n * k, n, p, k);
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    detail::gemm_at_acc(ap, gy, bn->grad.data() + (shared_b ? 0 : bi * k * p), n,
                                        k, p);
                }
            }
        };
    }
    return Tensor<T>(out);
}

// [.., r, c] -> [.., c, r]
template <typename T>
inline Tensor<T> transpose_last2(const Tensor<T>& a) {
    auto an = a.node();
    const Shape& as = an->shape;
    if (as.size() < 2) {
        throw std::invalid_argument("transpose_last2: need rank >= 2, got " + shape_str(as));
    }
    const std::size_t r = as[as.size() - 2];
    const std::size_t c = as[as.size() - 1];
    std::size_t batch = 1;
    for (std::size_t i = 0; i + 2 < as.size(); ++i) batch *= as[i];
    Shape os(as);
    os[os.size() - 2] = c;
    os[os.size() - 1] = r;
    auto out = detail::make_result<T>(os, {an});
    for (std::size_t bi = 0; bi < batch; ++bi) {
        const T* src = an->value.data() + bi * r * c;
        T* dst = out->value.data() + bi * r * c;
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
    }
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [an, o, r, c, batch]() {
            an->ensure_grad();
            for (std::size_t bi = 0; bi < batch; ++bi) {
                const T* gy = o->grad.data() + bi * r * c;
                T* gx = an->grad.data() + bi * r * c;
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += gy[j * r + i];
            }
        };
    }
    return Tensor<T>(out);
}

// [n, h*dh] -> [h, n, dh]
template <typename T>
inline Tensor<T> split_heads(const Tensor<T>& x, std::size_t h) {
    auto xn = x.node();
    if (xn->shape.size() != 2 || xn->shape[1] % h != 0) {
        throw std::invalid_argument("split_heads: bad shape " + shape_str(xn->shape) + " for " +
                                    std::to_string(h) + " heads");
    }
    const std::size_t n = xn->shape[0];
    const std::size_t dh = xn->shape[1] / h;
    auto out = detail::make_result<T>({h, n, dh}, {xn});
    for (std::size_t hi = 0; hi < h; ++hi)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dh; ++j)
                out->value[(hi * n + i) * dh + j] = xn->value[i * h * dh + hi * dh + j];
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [xn, o, h, n, dh]() {
            xn->ensure_grad();
            for (std::size_t hi = 0; hi < h; ++hi)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < dh; ++j)
                        xn->grad[i * h * dh + hi * dh + j] += o->grad[(hi * n + i) * dh + j];
        };
    }
    return Tensor<T>(out);
}

// [h, n, dh] -> [n, h*dh]
template <typename T>
inline Tensor<T> merge_heads(const Tensor<T>& x) {
    auto xn = x.node();
    if (xn->shape.size() != 3) {
        throw std::invalid_argument("merge_heads: bad shape " + shape_str(xn->shape));
    }
    const std::size_t h = xn->shape[0];
    const std::size_t n = xn->shape[1];
    const std::size_t dh = xn->shape[2];
    auto out = detail::make_result<T>({n, h * dh}, {xn});
    for (std::size_t hi = 0; hi < h; ++hi)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dh; ++j)
                out->value[i * h * dh + hi * dh + j] = xn->value[(hi * n + i) * dh + j];
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [xn, o, h, n, dh]() {
            xn->ensure_grad();
            for (std::size_t hi = 0; hi < h; ++hi)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < dh; ++j)
                        xn->grad[(hi * n + i) * dh + j] += o->grad[i * h * dh + hi * dh + j];
        };
    }
    return Tensor<T>(out);
}

// ---------------------------------------------------------------------------
// nonlinearities
// ---------------------------------------------------------------------------

template <typename T>
inline Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
    auto xn = x.node();
    const Shape& s = xn->shape;
    if (axis >= s.size()) {
        throw std::invalid_argument("softmax: axis " + std::to_string(axis) +
                                    " out of range for shape " + shape_str(s));
    }
    const std::size_t len = s[axis];
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];

    auto out = detail::make_result<T>(s, {xn});
    for (std::size_t oi = 0; oi < outer; ++oi) {
        for (std::size_t ii = 0; ii < inner; ++ii) {
            const std::size_t base = oi * len * inner + ii;
            T mx = xn->value[base];
            for (std::size_t l = 1; l < len; ++l)
                mx = std::max(mx, xn->value[base + l * inner]);
            T denom = T(0);
            for (std::size_t l = 0; l < len; ++l) {
                const T e = std::exp(xn->value[base + l * inner] - mx);
                out->value[base + l * inner] = e;
                denom += e;
            }
            for (std::size_t l = 0; l < len; ++l) out->value[base + l * inner] /= denom;
        }
    }
    detail::debug_check_finite(*out, "softmax");
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [xn, o, outer, inner, len]() {
            xn->ensure_grad();
            for (std::size_t oi = 0; oi < outer; ++oi) {
                for (std::size_t ii = 0; ii < inner; ++ii) {
                    const std::size_t base = oi * len * inner + ii;
                    T dot = T(0);
                    for (std::size_t l = 0; l < len; ++l)
                        dot += o->grad[base + l * inner] * o->value[base + l * inner];
                    for (std::size_t l = 0; l < len; ++l) {
                        const std::size_t idx = base + l * inner;
                        xn->grad[idx] += o->value[idx] * (o->grad[idx] - dot);
                    }
                }
            }
        };
    }
    return Tensor<T>(out);
}

// Normalizes the last dimension to zero mean, unit population variance,
// then applies the affine gain/bias.
template <typename T>
inline Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                           T eps) {
    auto xn = x.node();
    auto gn = gamma.node();
    auto bn = beta.node();
    const Shape& s = xn->shape;
    const std::size_t d = s.back();
    if (gn->numel() != d || bn->numel() != d) {
        throw std::invalid_argument("layernorm: gain/bias size must match last dim " +
                                    std::to_string(d));
    }
    const std::size_t rows = xn->numel() / d;
    auto out = detail::make_result<T>(s, {xn, gn, bn});
    std::vector<T> xhat(xn->numel());
    std::vector<T> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = xn->value.data() + r * d;
        T mean = T(0);
        for (std::size_t j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<T>(d);
        T var = T(0);
        for (std::size_t j = 0; j < d; ++j) {
            const T c = xr[j] - mean;
            var += c * c;
        }
        var /= static_cast<T>(d);
        const T istd = T(1) / std::sqrt(var + eps);
        inv_std[r] = istd;
        for (std::size_t j = 0; j < d; ++j) {
            const T xh = (xr[j] - mean) * istd;
            xhat[r * d + j] = xh;
            out->value[r * d + j] = gn->value[j] * xh + bn->value[j];
        }
    }
    detail::debug_check_finite(*out, "layernorm");
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [xn, gn, bn, o, rows, d, xhat = std::move(xhat),
                         inv_std = std::move(inv_std)]() {
            for (std::size_t r = 0; r < rows; ++r) {
                const T* gy = o->grad.data() + r * d;
                const T* xh = xhat.data() + r * d;
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    for (std::size_t j = 0; j < d; ++j) gn->grad[j] += gy[j] * xh[j];
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (std::size_t j = 0; j < d; ++j) bn->grad[j] += gy[j];
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    T mean_dxh = T(0), mean_dxh_xh = T(0);
                    for (std::size_t j = 0; j < d; ++j) {
                        const T dxh = gy[j] * gn->value[j];
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xh[j];
                    }
                    mean_dxh /= static_cast<T>(d);
                    mean_dxh_xh /= static_cast<T>(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        const T dxh = gy[j] * gn->value[j];
                        xn->grad[r * d + j] +=
                            inv_std[r] * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
                    }
                }
            }
        };
    }
    return Tensor<T>(out);
}

// Exact Gaussian-CDF form: x * Phi(x).
template <typename T>
inline Tensor<T> gelu(const Tensor<T>& x) {
    auto xn = x.node();
    auto out = detail::make_result<T>(xn->shape, {xn});
    const std::size_t n = xn->numel();
    constexpr double kInvSqrt2 = 0.7071067811865475244;
    for (std::size_t i = 0; i < n; ++i) {
        const double xv = static_cast<double>(xn->value[i]);
        out->value[i] = static_cast<T>(xv * 0.5 * (1.0 + std::erf(xv * kInvSqrt2)));
    }
    detail::debug_check_finite(*out, "gelu");
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [xn, o, n]() {
            xn->ensure_grad();
            constexpr double kInvSqrt2Pi = 0.3989422804014326779;
            for (std::size_t i = 0; i < n; ++i) {
                const double xv = static_cast<double>(xn->value[i]);
                const double phi = 0.5 * (1.0 + std::erf(xv * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xv * xv);
                xn->grad[i] += o->grad[i] * static_cast<T>(phi + xv * pdf);
            }
        };
    }
    return Tensor<T>(out);
}

// Inverted dropout: survivors scaled by 1/(1-p). Identity when not training.
template <typename T>
inline Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng) {
    if (p < 0.0 || p >= 1.0) {
        throw std::invalid_argument("dropout: p must be in [0, 1), got " + std::to_string(p));
    }
    if (!training || p == 0.0) return x;
    auto xn = x.node();
    auto out = detail::make_result<T>(xn->shape, {xn});
    const std::size_t n = xn->numel();
    std::vector<T> mask(n);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    for (std::size_t i = 0; i < n; ++i) {
        mask[i] = rng.uniform() < p ? T(0) : keep_scale;
        out->value[i] = xn->value[i] * mask[i];
    }
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [xn, o, n, mask = std::move(mask)]() {
            xn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) xn->grad[i] += o->grad[i] * mask[i];
        };
    }
    return Tensor<T>(out);
}

// ---------------------------------------------------------------------------
// gather / scatter ops
// ---------------------------------------------------------------------------

// Rows of `table` selected by `ids`.
template <typename T>
inline Tensor<T> embedding(const Tensor<T>& table, const std::vector<int>& ids) {
    auto tn = table.node();
    if (tn->shape.size() != 2) {
        throw std::invalid_argument("embedding: table must be rank 2, got " +
                                    shape_str(tn->shape));
    }
    const std::size_t v = tn->shape[0];
    const std::size_t d = tn->shape[1];
    for (const int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= v) {
            throw std::out_of_range("embedding: id " + std::to_string(id) +
                                    " out of range for table " + shape_str(tn->shape));
        }
    }
    const std::size_t n = ids.size();
    auto out = detail::make_result<T>({n, d}, {tn});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(tn->value.data() + static_cast<std::size_t>(ids[i]) * d, d,
                    out->value.data() + i * d);
    }
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [tn, o, ids, n, d]() {
            tn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                T* dst = tn->grad.data() + static_cast<std::size_t>(ids[i]) * d;
                const T* src = o->grad.data() + i * d;
                for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
            }
        };
    }
    return Tensor<T>(out);
}

// Contiguous row slice [start, start+len) of a rank-2 tensor.
template <typename T>
inline Tensor<T> slice_rows(const Tensor<T>& x, std::size_t start, std::size_t len) {
    auto xn = x.node();
    if (xn->shape.size() != 2 || start + len > xn->shape[0]) {
        throw std::invalid_argument("slice_rows: slice [" + std::to_string(start) + ", " +
                                    std::to_string(start + len) + ") out of range for " +
                                    shape_str(xn->shape));
    }
    const std::size_t d = xn->shape[1];
    auto out = detail::make_result<T>({len, d}, {xn});
    std::copy_n(xn->value.data() + start * d, len * d, out->value.data());
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [xn, o, start, len, d]() {
            xn->ensure_grad();
            for (std::size_t i = 0; i < len * d; ++i) xn->grad[start * d + i] += o->grad[i];
        };
    }
    return Tensor<T>(out);
}

// Row i of a rank-2 tensor as a rank-1 vector.
template <typename T>
inline Tensor<T> select_row(const Tensor<T>& x, std::size_t i) {
    auto xn = x.node();
    if (xn->shape.size() != 2 || i >= xn->shape[0]) {
        throw std::invalid_argument("select_row: row " + std::to_string(i) + " out of range for " +
                                    shape_str(xn->shape));
    }
    const std::size_t d = xn->shape[1];
    auto out = detail::make_result<T>({d}, {xn});
    std::copy_n(xn->value.data() + i * d, d, out->value.data());
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [xn, o, i, d]() {
            xn->ensure_grad();
            for (std::size_t j = 0; j < d; ++j) xn->grad[i * d + j] += o->grad[j];
        };
    }
    return Tensor<T>(out);
}

// First `repeat` rows copy the vector e, remaining rows are all ones.
template <typename T>
inline Tensor<T> repeat_pad_ones(const Tensor<T>& e, std::size_t n, std::size_t repeat) {
    auto en = e.node();
    if (en->shape.size() != 1) {
        throw std::invalid_argument("repeat_pad_ones: need rank-1 input, got " +
                                    shape_str(en->shape));
    }
    if (repeat > n) repeat = n;
    const std::size_t d = en->shape[0];
    auto out = detail::make_result<T>({n, d}, {en});
    for (std::size_t i = 0; i < n; ++i) {
        if (i < repeat) {
            std::copy_n(en->value.data(), d, out->value.data() + i * d);
        } else {
            std::fill_n(out->value.data() + i * d, d, T(1));
        }
    }
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [en, o, repeat, d]() {
            en->ensure_grad();
            for (std::size_t i = 0; i < repeat; ++i)
                for (std::size_t j = 0; j < d; ++j) en->grad[j] += o->grad[i * d + j];
        };
    }
    return Tensor<T>(out);
}

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

inline constexpr int kIgnoreTarget = -1;

// Mean negative log-softmax probability of the target over positions whose
// target differs from `ignore_id` (and from the always-ignored sentinel -1).
template <typename T>
inline Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets,
                               int ignore_id = kIgnoreTarget) {
    auto ln = logits.node();
    if (ln->shape.size() != 2 || ln->shape[0] != targets.size()) {
        throw std::invalid_argument("cross_entropy: logits " + shape_str(ln->shape) +
                                    " incompatible with " + std::to_string(targets.size()) +
                                    " targets");
    }
    const std::size_t n = ln->shape[0];
    const std::size_t v = ln->shape[1];
    std::size_t count = 0;
    double loss = 0.0;
    std::vector<double> lse(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int t = targets[i];
        if (t == ignore_id || t == kIgnoreTarget) continue;
        if (t < 0 || static_cast<std::size_t>(t) >= v) {
            throw std::out_of_range("cross_entropy: target " + std::to_string(t) +
                                    " out of range for vocab " + std::to_string(v));
        }
        const T* row = ln->value.data() + i * v;
        T mx = row[0];
        for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < v; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
        lse[i] = static_cast<double>(mx) + std::log(denom);
        loss += lse[i] - static_cast<double>(row[t]);
        ++count;
    }
    if (count == 0) throw std::runtime_error("no loss positions");
    auto out = detail::make_result<T>({1}, {ln});
    out->value[0] = static_cast<T>(loss / static_cast<double>(count));
    if (out->requires_grad) {
        auto* o = out.get();
        out->backprop = [ln, o, targets, ignore_id, n, v, count, lse = std::move(lse)]() {
            ln->ensure_grad();
            const T g = o->grad[0] / static_cast<T>(count);
            for (std::size_t i = 0; i < n; ++i) {
                const int t = targets[i];
                if (t == ignore_id || t == kIgnoreTarget) continue;
                const T* row = ln->value.data() + i * v;
                T* grow = ln->grad.data() + i * v;
                for (std::size_t j = 0; j < v; ++j) {
                    const T p =
                        static_cast<T>(std::exp(static_cast<double>(row[j]) - lse[i]));
                    grow[j] += g * (p - (static_cast<std::size_t>(t) == j ? T(1) : T(0)));
                }
            }
        };
    }
    return Tensor<T>(out);
}

// ---------------------------------------------------------------------------
// parameters and Adam
// ---------------------------------------------------------------------------

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    std::vector<T> adam_m;
    std::vector<T> adam_v;
    std::int64_t step_count = 0;

    Parameter() = default;
    Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)) {
        value.set_requires_grad();
        adam_m.assign(value.numel(), T(0));
        adam_v.assign(value.numel(), T(0));
    }

    std::vector<T>& grad() { return value.grad(); }
};

// One bias-corrected Adam update; gradients are consumed (reset to zero).
template <typename T>
inline void adam_step(std::vector<Parameter<T>*>& params, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
    for (auto* p : params) {
        auto& val = p->value.mutable_data();
        auto& g = p->grad();
        ++p->step_count;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p->step_count));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p->step_count));
        for (std::size_t i = 0; i < val.size(); ++i) {
            const double gi = static_cast<double>(g[i]);
            const double m = beta1 * static_cast<double>(p->adam_m[i]) + (1.0 - beta1) * gi;
            const double v = beta2 * static_cast<double>(p->adam_v[i]) + (1.0 - beta2) * gi * gi;
            p->adam_m[i] = static_cast<T>(m);
            p->adam_v[i] = static_cast<T>(v);
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            val[i] = static_cast<T>(static_cast<double>(val[i]) -
                                    lr * mhat / (std::sqrt(vhat) + eps));
        }
        p->value.zero_grad();
    }
}

}  // namespace sbae
