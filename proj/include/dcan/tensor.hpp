// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense-tensor arithmetic with reverse-mode automatic
// differentiation. Tensors are row-major buffers of a scalar type S;
// the engine is templated so the same model code runs in f32 for
// training and f64 for gradient verification.
//
// Ops build a dynamic graph of shared nodes. backward(loss) topologically
// sorts the graph and accumulates dLoss/dTensor into every reachable
// tensor with requires_grad set. Values are immutable once created; only
// grad buffers mutate.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dcan/common.hpp"
#include "dcan/rng.hpp"

namespace dcan {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

template <class S>
class Tensor {
public:
    using Buf = std::vector<S>;
    using BufPtr = std::shared_ptr<Buf>;

    struct Node {
        Shape shape;
        BufPtr val;
        BufPtr grad;  // allocated on first use; may alias a parent's buffer
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backprop;
    };

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return filled(std::move(shape), S(0), requires_grad);
    }

    static Tensor filled(Shape shape, S value, bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->val = std::make_shared<Buf>(shape_numel(n->shape), value);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor from(Shape shape, Buf data, bool requires_grad = false) {
        check(shape_numel(shape) == static_cast<int64_t>(data.size()),
              "Tensor::from: data length does not match shape " + shape_str(shape));
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->val = std::make_shared<Buf>(std::move(data));
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor scalar(S v, bool requires_grad = false) {
        return from({1}, Buf{v}, requires_grad);
    }

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    int64_t dim(int i) const {
        const int r = static_cast<int>(n_->shape.size());
        return n_->shape[static_cast<size_t>(i < 0 ? r + i : i)];
    }
    int rank() const { return static_cast<int>(n_->shape.size()); }
    int64_t numel() const { return shape_numel(n_->shape); }
    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool rg) { n_->requires_grad = rg; }

    S* data() { return n_->val->data(); }
    const S* data() const { return n_->val->data(); }
    S item() const {
        check(numel() == 1, "item(): tensor is not scalar");
        return (*n_->val)[0];
    }

    bool has_grad() const { return n_->grad != nullptr; }
    S* grad() {
        ensure_grad();
        return n_->grad->data();
    }
    const S* grad_data() const { return n_->grad ? n_->grad->data() : nullptr; }

    void ensure_grad() {
        if (!n_->grad) n_->grad = std::make_shared<Buf>(numel(), S(0));
    }

    void zero_grad() {
        if (n_->grad) std::fill(n_->grad->begin(), n_->grad->end(), S(0));
    }

    bool all_finite() const {
        for (S v : *n_->val)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    std::shared_ptr<Node> node() const { return n_; }

private:
    std::shared_ptr<Node> n_;
};

namespace detail {

template <class S>
Tensor<S> make_op(Shape shape, std::vector<Tensor<S>> parents,
                  std::function<void(typename Tensor<S>::Node&)> backprop) {
    auto n = std::make_shared<typename Tensor<S>::Node>();
    n->shape = std::move(shape);
    n->val = std::make_shared<typename Tensor<S>::Buf>(shape_numel(n->shape), S(0));
    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
    n->requires_grad = rg;
    for (const auto& p : parents) n->parents.push_back(p.node());
    if (rg) n->backprop = std::move(backprop);
    return Tensor<S>(std::move(n));
}

// C[M,N] (+)= A[M,K] * B[K,N]
template <class S>
void mm_nn(bool accumulate, int64_t M, int64_t N, int64_t K,
           const S* A, const S* B, S* C) {
    if (!accumulate) std::fill(C, C + M * N, S(0));
    for (int64_t i = 0; i < M; ++i) {
        S* c = C + i * N;
        const S* a = A + i * K;
        for (int64_t k = 0; k < K; ++k) {
            const S aik = a[k];
            if (aik == S(0)) continue;
            const S* b = B + k * N;
            for (int64_t j = 0; j < N; ++j) c[j] += aik * b[j];
        }
    }
}

// C[M,N] (+)= A[M,K] * B[N,K]^T
template <class S>
void mm_nt(bool accumulate, int64_t M, int64_t N, int64_t K,
           const S* A, const S* B, S* C) {
    for (int64_t i = 0; i < M; ++i) {
        const S* a = A + i * K;
        S* c = C + i * N;
        for (int64_t j = 0; j < N; ++j) {
            const S* b = B + j * K;
            S acc = 0;
            for (int64_t k = 0; k < K; ++k) acc += a[k] * b[k];
            if (accumulate)
                c[j] += acc;
            else
                c[j] = acc;
        }
    }
}

// C[M,N] (+)= A[K,M]^T * B[K,N]
template <class S>
void mm_tn(bool accumulate, int64_t M, int64_t N, int64_t K,
           const S* A, const S* B, S* C) {
    if (!accumulate) std::fill(C, C + M * N, S(0));
    for (int64_t k = 0; k < K; ++k) {
        const S* a = A + k * M;
        const S* b = B + k * N;
        for (int64_t i = 0; i < M; ++i) {
            const S aki = a[i];
            if (aki == S(0)) continue;
            S* c = C + i * N;
            for (int64_t j = 0; j < N; ++j) c[j] += aki * b[j];
        }
    }
}

template <class S>
void add_into(S* dst, const S* src, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and broadcast arithmetic
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> add(Tensor<S> a, Tensor<S> b) {
    check(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
    auto out = detail::make_op<S>(
        a.shape(), {a, b}, [a, b](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            const int64_t n = shape_numel(self.shape);
            if (a.requires_grad()) detail::add_into(a.grad(), g, n);
            if (b.requires_grad()) detail::add_into(b.grad(), g, n);
        });
    const S* pa = a.data();
    const S* pb = b.data();
    S* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + pb[i];
    return out;
}

template <class S>
Tensor<S> sub(Tensor<S> a, Tensor<S> b) {
    check(a.shape() == b.shape(), "sub: shape mismatch");
    auto out = detail::make_op<S>(
        a.shape(), {a, b}, [a, b](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            const int64_t n = shape_numel(self.shape);
            if (a.requires_grad()) detail::add_into(a.grad(), g, n);
            if (b.requires_grad()) {
                S* gb = b.grad();
                for (int64_t i = 0; i < n; ++i) gb[i] -= g[i];
            }
        });
    const S* pa = a.data();
    const S* pb = b.data();
    S* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] - pb[i];
    return out;
}

template <class S>
Tensor<S> mul(Tensor<S> a, Tensor<S> b) {
    check(a.shape() == b.shape(), "mul: shape mismatch");
    auto out = detail::make_op<S>(
        a.shape(), {a, b}, [a, b](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            const int64_t n = shape_numel(self.shape);
            const S* pa = a.data();
            const S* pb = b.data();
            if (a.requires_grad()) {
                S* ga = a.grad();
                for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * pb[i];
            }
            if (b.requires_grad()) {
                S* gb = b.grad();
                for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * pa[i];
            }
        });
    const S* pa = a.data();
    const S* pb = b.data();
    S* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * pb[i];
    return out;
}

template <class S>
Tensor<S> scale(Tensor<S> a, S c) {
    auto out = detail::make_op<S>(
        a.shape(), {a}, [a, c](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            S* ga = a.grad();
            for (int64_t i = 0; i < shape_numel(self.shape); ++i) ga[i] += c * g[i];
        });
    const S* pa = a.data();
    S* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = c * pa[i];
    return out;
}

// x + y where y's shape is a suffix of x's shape (bias rows, positional
// tables). Backward sum-reduces over the leading dimensions.
template <class S>
Tensor<S> badd(Tensor<S> x, Tensor<S> y) {
    const auto& xs = x.shape();
    const auto& ys = y.shape();
    check(ys.size() <= xs.size() &&
              std::equal(ys.begin(), ys.end(), xs.end() - ys.size()),
          "badd: " + shape_str(ys) + " is not a suffix of " + shape_str(xs));
    const int64_t ny = shape_numel(ys);
    const int64_t reps = shape_numel(xs) / ny;
    auto out = detail::make_op<S>(
        xs, {x, y}, [x, y, ny, reps](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            if (x.requires_grad()) detail::add_into(x.grad(), g, ny * reps);
            if (y.requires_grad()) {
                S* gy = y.grad();
                for (int64_t r = 0; r < reps; ++r)
                    detail::add_into(gy, g + r * ny, ny);
            }
        });
    const S* px = x.data();
    const S* py = y.data();
    S* po = out.data();
    for (int64_t r = 0; r < reps; ++r)
        for (int64_t i = 0; i < ny; ++i) po[r * ny + i] = px[r * ny + i] + py[i];
    return out;
}

// Multiply every trailing-dim row of x by a per-row scalar. col's shape must
// equal x's shape without its last axis. Used for pad masking and the
// coverage position averages.
template <class S>
Tensor<S> colmul(Tensor<S> x, Tensor<S> col) {
    Shape lead(x.shape().begin(), x.shape().end() - 1);
    check(col.shape() == lead, "colmul: multiplier shape must be " + shape_str(lead));
    const int64_t rows = shape_numel(lead);
    const int64_t d = x.dim(-1);
    auto out = detail::make_op<S>(
        x.shape(), {x, col}, [x, col, rows, d](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            const S* pc = col.data();
            if (x.requires_grad()) {
                S* gx = x.grad();
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t i = 0; i < d; ++i) gx[r * d + i] += g[r * d + i] * pc[r];
            }
            if (col.requires_grad()) {
                S* gc = col.grad();
                const S* px = x.data();
                for (int64_t r = 0; r < rows; ++r) {
                    S acc = 0;
                    for (int64_t i = 0; i < d; ++i) acc += g[r * d + i] * px[r * d + i];
                    gc[r] += acc;
                }
            }
        });
    const S* px = x.data();
    const S* pc = col.data();
    S* po = out.data();
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t i = 0; i < d; ++i) po[r * d + i] = px[r * d + i] * pc[r];
    return out;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

// Zero-copy reshape: value and grad buffers alias the parent's.
template <class S>
Tensor<S> reshape(Tensor<S> x, Shape shape) {
    check(shape_numel(shape) == x.numel(),
          "reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    auto n = std::make_shared<typename Tensor<S>::Node>();
    n->shape = std::move(shape);
    n->val = x.node()->val;
    n->requires_grad = x.requires_grad();
    if (n->requires_grad) {
        x.ensure_grad();
        n->grad = x.node()->grad;
    }
    n->parents.push_back(x.node());
    return Tensor<S>(std::move(n));
}

template <class S>
Tensor<S> slice_cols(Tensor<S> x, int64_t from, int64_t len) {
    const int64_t d = x.dim(-1);
    check(from >= 0 && len > 0 && from + len <= d, "slice_cols: range out of bounds");
    Shape os = x.shape();
    os.back() = len;
    const int64_t rows = x.numel() / d;
    auto out = detail::make_op<S>(
        os, {x}, [x, from, len, rows, d](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            S* gx = x.grad();
            for (int64_t r = 0; r < rows; ++r)
                detail::add_into(gx + r * d + from, g + r * len, len);
        });
    const S* px = x.data();
    S* po = out.data();
    for (int64_t r = 0; r < rows; ++r)
        std::copy(px + r * d + from, px + r * d + from + len, po + r * len);
    return out;
}

template <class S>
Tensor<S> concat_cols(std::vector<Tensor<S>> parts) {
    check(!parts.empty(), "concat_cols: empty input");
    Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
    int64_t total = 0;
    for (auto& p : parts) {
        Shape pl(p.shape().begin(), p.shape().end() - 1);
        check(pl == lead, "concat_cols: leading dims differ");
        total += p.dim(-1);
    }
    Shape os = parts[0].shape();
    os.back() = total;
    const int64_t rows = shape_numel(lead);
    auto out = detail::make_op<S>(
        os, parts, [parts, rows, total](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            int64_t off = 0;
            for (auto& p : parts) {
                const int64_t d = p.dim(-1);
                if (p.requires_grad()) {
                    S* gp = p.grad();
                    for (int64_t r = 0; r < rows; ++r)
                        detail::add_into(gp + r * d, g + r * total + off, d);
                }
                off += d;
            }
        });
    S* po = out.data();
    int64_t off = 0;
    for (auto& p : parts) {
        const int64_t d = p.dim(-1);
        const S* pp = p.data();
        for (int64_t r = 0; r < rows; ++r)
            std::copy(pp + r * d, pp + (r + 1) * d, po + r * total + off);
        off += d;
    }
    return out;
}

template <class S>
Tensor<S> concat_rows(std::vector<Tensor<S>> parts) {
    check(!parts.empty(), "concat_rows: empty input");
    const int64_t d = parts[0].dim(-1);
    int64_t rows = 0;
    for (auto& p : parts) {
        check(p.rank() == 2 && p.dim(-1) == d, "concat_rows: parts must be [*, d]");
        rows += p.dim(0);
    }
    auto out = detail::make_op<S>(
        {rows, d}, parts, [parts, d](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            int64_t off = 0;
            for (auto& p : parts) {
                const int64_t n = p.numel();
                if (p.requires_grad()) detail::add_into(p.grad(), g + off, n);
                off += n;
            }
        });
    S* po = out.data();
    int64_t off = 0;
    for (auto& p : parts) {
        std::copy(p.data(), p.data() + p.numel(), po + off);
        off += p.numel();
    }
    return out;
}

// Gather rows of a [M, D] table by an index array; output shape is
// idx_shape + [D]. Backward scatter-adds.
template <class S>
Tensor<S> row_gather(Tensor<S> table, std::shared_ptr<std::vector<int64_t>> idx,
                     Shape idx_shape) {
    check(table.rank() == 2, "row_gather: table must be 2-D");
    const int64_t m = table.dim(0);
    const int64_t d = table.dim(1);
    check(shape_numel(idx_shape) == static_cast<int64_t>(idx->size()),
          "row_gather: index shape mismatch");
    for (int64_t i : *idx)
        check(i >= 0 && i < m, "row_gather: index out of range");
    Shape os = idx_shape;
    os.push_back(d);
    const int64_t k = static_cast<int64_t>(idx->size());
    auto out = detail::make_op<S>(
        os, {table}, [table, idx, k, d](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            S* gt = table.grad();
            for (int64_t r = 0; r < k; ++r)
                detail::add_into(gt + (*idx)[r] * d, g + r * d, d);
        });
    const S* pt = table.data();
    S* po = out.data();
    for (int64_t r = 0; r < k; ++r)
        std::copy(pt + (*idx)[r] * d, pt + ((*idx)[r] + 1) * d, po + r * d);
    return out;
}

template <class S>
Tensor<S> row_gather(Tensor<S> table, const std::vector<int64_t>& idx) {
    auto p = std::make_shared<std::vector<int64_t>>(idx);
    return row_gather(table, p, {static_cast<int64_t>(idx.size())});
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

// 2-D matmul with optional transposes: C = op(A) * op(B).
template <class S>
Tensor<S> matmul(Tensor<S> a, Tensor<S> b, bool ta = false, bool tb = false) {
    check(a.rank() == 2 && b.rank() == 2, "matmul: operands must be 2-D");
    check(!(ta && tb), "matmul: double transpose not supported");
    const int64_t M = ta ? a.dim(1) : a.dim(0);
    const int64_t K = ta ? a.dim(0) : a.dim(1);
    const int64_t Kb = tb ? b.dim(1) : b.dim(0);
    const int64_t N = tb ? b.dim(0) : b.dim(1);
    check(K == Kb, "matmul: inner dimensions differ");
    auto out = detail::make_op<S>(
        {M, N}, {a, b}, [a, b, ta, tb, M, N, K](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            const S* pa = a.data();
            const S* pb = b.data();
            if (!ta && !tb) {
                if (a.requires_grad()) detail::mm_nt(true, M, K, N, g, pb, a.grad());
                if (b.requires_grad()) detail::mm_tn(true, K, N, M, pa, g, b.grad());
            } else if (!ta && tb) {  // C = A * B^T
                if (a.requires_grad()) detail::mm_nn(true, M, K, N, g, pb, a.grad());
                if (b.requires_grad()) detail::mm_tn(true, N, K, M, g, pa, b.grad());
            } else {  // C = A^T * B
                if (a.requires_grad()) detail::mm_nt(true, K, M, N, pb, g, a.grad());
                if (b.requires_grad()) detail::mm_nn(true, K, N, M, pa, g, b.grad());
            }
        });
    if (!ta && !tb)
        detail::mm_nn(false, M, N, K, a.data(), b.data(), out.data());
    else if (!ta && tb)
        detail::mm_nt(false, M, N, K, a.data(), b.data(), out.data());
    else
        detail::mm_tn(false, M, N, K, a.data(), b.data(), out.data());
    return out;
}

// x [..., K] * w [K, N] applied to every row. Returns x's shape with the
// last axis replaced by N.
template <class S>
Tensor<S> matmul_rows(Tensor<S> x, Tensor<S> w) {
    const int64_t k = x.dim(-1);
    Shape os = x.shape();
    os.back() = w.dim(1);
    auto flat = reshape(x, {x.numel() / k, k});
    return reshape(matmul(flat, w), std::move(os));
}

// Batched matmul: a [B,M,K] x b [B,K,N] -> [B,M,N]; tb flips b to [B,N,K].
template <class S>
Tensor<S> bmm(Tensor<S> a, Tensor<S> b, bool tb = false) {
    check(a.rank() == 3 && b.rank() == 3, "bmm: operands must be 3-D");
    const int64_t B = a.dim(0);
    check(b.dim(0) == B, "bmm: batch dims differ");
    const int64_t M = a.dim(1);
    const int64_t K = a.dim(2);
    const int64_t Kb = tb ? b.dim(2) : b.dim(1);
    const int64_t N = tb ? b.dim(1) : b.dim(2);
    check(K == Kb, "bmm: inner dimensions differ");
    auto out = detail::make_op<S>(
        {B, M, N}, {a, b},
        [a, b, tb, B, M, N, K](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            const S* pa = a.data();
            const S* pb = b.data();
            S* ga = a.requires_grad() ? a.grad() : nullptr;
            S* gb = b.requires_grad() ? b.grad() : nullptr;
            for (int64_t i = 0; i < B; ++i) {
                const S* gi = g + i * M * N;
                const S* ai = pa + i * M * K;
                const S* bi = pb + i * (tb ? N * K : K * N);
                if (!tb) {
                    if (ga) detail::mm_nt(true, M, K, N, gi, bi, ga + i * M * K);
                    if (gb) detail::mm_tn(true, K, N, M, ai, gi, gb + i * K * N);
                } else {  // C = A * B^T with B [N,K]
                    if (ga) detail::mm_nn(true, M, K, N, gi, bi, ga + i * M * K);
                    if (gb) detail::mm_tn(true, N, K, M, gi, ai, gb + i * N * K);
                }
            }
        });
    for (int64_t i = 0; i < B; ++i) {
        const S* ai = a.data() + i * M * K;
        const S* bi = b.data() + i * (tb ? N * K : K * N);
        S* ci = out.data() + i * M * N;
        if (!tb)
            detail::mm_nn(false, M, N, K, ai, bi, ci);
        else
            detail::mm_nt(false, M, N, K, ai, bi, ci);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Nonlinearities and normalization
// ---------------------------------------------------------------------------

// Exact Gaussian-CDF form: x * Phi(x) with Phi from erf.
template <class S>
Tensor<S> gelu(Tensor<S> x) {
    auto out = detail::make_op<S>(
        x.shape(), {x}, [x](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            const S* px = x.data();
            S* gx = x.grad();
            constexpr double inv_sqrt2 = 0.7071067811865475244;
            constexpr double inv_sqrt2pi = 0.3989422804014326779;
            for (int64_t i = 0; i < shape_numel(self.shape); ++i) {
                const double v = static_cast<double>(px[i]);
                const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
                const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
                gx[i] += g[i] * static_cast<S>(cdf + v * pdf);
            }
        });
    const S* px = x.data();
    S* po = out.data();
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    for (int64_t i = 0; i < out.numel(); ++i) {
        const double v = static_cast<double>(px[i]);
        po[i] = static_cast<S>(v * 0.5 * (1.0 + std::erf(v * inv_sqrt2)));
    }
    return out;
}

// Softmax over the last axis. An optional 0/1 validity mask zeroes invalid
// entries; probabilities are computed over valid entries only, max-shifted
// first. The mask either drops x's second-to-last axis (a per-batch key
// mask shared by every query row, e.g. [B,N] against [B,Q,N]) or is a
// suffix of x's shape ending in the last axis.
template <class S>
Tensor<S> softmax(Tensor<S> x, Tensor<S> mask = Tensor<S>()) {
    const int64_t d = x.dim(-1);
    const int64_t rows = x.numel() / d;
    int64_t mask_rows = 0;
    int64_t query_rep = 1;  // consecutive x-rows sharing one mask row
    if (mask.defined()) {
        const auto& ms = mask.shape();
        const auto& xs = x.shape();
        Shape dropped;
        if (xs.size() >= 2) {
            dropped = xs;
            dropped.erase(dropped.end() - 2);
        }
        if (!dropped.empty() && ms == dropped) {
            query_rep = xs[xs.size() - 2];
        } else {
            check(ms.back() == d && ms.size() <= xs.size() &&
                      std::equal(ms.begin(), ms.end(), xs.end() - ms.size()),
                  "softmax: mask must drop the query axis or be a suffix shape");
        }
        mask_rows = shape_numel(ms) / d;
    }
    // Masked entries have probability zero, so the standard softmax backward
    // already sends them zero gradient; the mask is not needed again.
    auto out = detail::make_op<S>(
        x.shape(), {x}, [x, rows, d](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            const S* p = self.val->data();
            S* gx = x.grad();
            for (int64_t r = 0; r < rows; ++r) {
                const S* pr = p + r * d;
                const S* gr = g + r * d;
                S dot = 0;
                for (int64_t i = 0; i < d; ++i) dot += gr[i] * pr[i];
                S* gxr = gx + r * d;
                for (int64_t i = 0; i < d; ++i) gxr[i] += pr[i] * (gr[i] - dot);
            }
        });
    const S* px = x.data();
    S* po = out.data();
    const S* pm = mask.defined() ? mask.data() : nullptr;
    for (int64_t r = 0; r < rows; ++r) {
        const S* xr = px + r * d;
        S* or_ = po + r * d;
        const S* mrow = pm ? pm + ((r / query_rep) % mask_rows) * d : nullptr;
        S mx = -std::numeric_limits<S>::infinity();
        int64_t valid = 0;
        for (int64_t i = 0; i < d; ++i) {
            if (!mrow || mrow[i] != S(0)) {
                mx = std::max(mx, xr[i]);
                ++valid;
            }
        }
        check(valid > 0, "softmax: row has no valid entries");
        if (!std::isfinite(static_cast<double>(mx)))
            throw NumericError("softmax: non-finite attention scores");
        S sum = 0;
        for (int64_t i = 0; i < d; ++i) {
            if (!mrow || mrow[i] != S(0)) {
                or_[i] = std::exp(xr[i] - mx);
                sum += or_[i];
            } else {
                or_[i] = 0;
            }
        }
        for (int64_t i = 0; i < d; ++i) or_[i] /= sum;
    }
    return out;
}

// Layer normalization over the last axis with learned gain and bias.
template <class S>
Tensor<S> layer_norm(Tensor<S> x, Tensor<S> gain, Tensor<S> bias, S eps) {
    const int64_t d = x.dim(-1);
    check(gain.numel() == d && bias.numel() == d, "layer_norm: gain/bias must be [d]");
    const int64_t rows = x.numel() / d;
    // Cache the normalized rows for backward.
    auto xhat = std::make_shared<typename Tensor<S>::Buf>(x.numel());
    auto inv_std = std::make_shared<typename Tensor<S>::Buf>(rows);
    auto out = detail::make_op<S>(
        x.shape(), {x, gain, bias},
        [x, gain, bias, xhat, inv_std, rows, d](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            const S* pg = gain.data();
            for (int64_t r = 0; r < rows; ++r) {
                const S* gr = g + r * d;
                const S* hr = xhat->data() + r * d;
                if (gain.requires_grad()) {
                    S* gg = gain.grad();
                    for (int64_t i = 0; i < d; ++i) gg[i] += gr[i] * hr[i];
                }
                if (bias.requires_grad()) {
                    S* gb = bias.grad();
                    for (int64_t i = 0; i < d; ++i) gb[i] += gr[i];
                }
                if (x.requires_grad()) {
                    S m1 = 0, m2 = 0;
                    for (int64_t i = 0; i < d; ++i) {
                        const S dh = gr[i] * pg[i];
                        m1 += dh;
                        m2 += dh * hr[i];
                    }
                    m1 /= static_cast<S>(d);
                    m2 /= static_cast<S>(d);
                    S* gx = x.grad() + r * d;
                    const S is = (*inv_std)[r];
                    for (int64_t i = 0; i < d; ++i)
                        gx[i] += is * (gr[i] * pg[i] - m1 - hr[i] * m2);
                }
            }
        });
    const S* px = x.data();
    const S* pg = gain.data();
    const S* pb = bias.data();
    S* po = out.data();
    for (int64_t r = 0; r < rows; ++r) {
        const S* xr = px + r * d;
        S mean = 0;
        for (int64_t i = 0; i < d; ++i) mean += xr[i];
        mean /= static_cast<S>(d);
        S var = 0;
        for (int64_t i = 0; i < d; ++i) {
            const S c = xr[i] - mean;
            var += c * c;
        }
        var /= static_cast<S>(d);
        const S is = S(1) / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        S* hr = xhat->data() + r * d;
        S* or_ = po + r * d;
        for (int64_t i = 0; i < d; ++i) {
            hr[i] = (xr[i] - mean) * is;
            or_[i] = hr[i] * pg[i] + pb[i];
        }
    }
    return out;
}

// Inverted dropout: scales kept entries by 1/keep at train time so
// inference is the identity. rate 0 (or inference) returns x unchanged.
template <class S>
Tensor<S> dropout(Tensor<S> x, double rate, Rng* rng, bool training) {
    if (!training || rate <= 0.0) return x;
    check(rate < 1.0, "dropout: rate must be < 1");
    check(rng != nullptr, "dropout: rng required at train time");
    const S keep = static_cast<S>(1.0 - rate);
    auto factors = std::make_shared<typename Tensor<S>::Buf>(x.numel());
    for (auto& f : *factors) f = rng->uniform() < rate ? S(0) : S(1) / keep;
    auto out = detail::make_op<S>(
        x.shape(), {x}, [x, factors](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            S* gx = x.grad();
            const S* f = factors->data();
            for (int64_t i = 0; i < shape_numel(self.shape); ++i) gx[i] += g[i] * f[i];
        });
    const S* px = x.data();
    const S* f = factors->data();
    S* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = px[i] * f[i];
    return out;
}

// ---------------------------------------------------------------------------
// Sequence ops (coverage recurrences)
// ---------------------------------------------------------------------------

// Cumulative sum along axis 1 of [B, T, D].
template <class S>
Tensor<S> cumsum_axis1(Tensor<S> x) {
    check(x.rank() == 3, "cumsum_axis1: expect [B,T,D]");
    const int64_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
    auto out = detail::make_op<S>(
        x.shape(), {x}, [x, B, T, D](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            S* gx = x.grad();
            // dL/dx_t = sum_{s >= t} dL/dc_s: reverse running sum
            std::vector<S> acc(D);
            for (int64_t b = 0; b < B; ++b) {
                std::fill(acc.begin(), acc.end(), S(0));
                for (int64_t t = T - 1; t >= 0; --t) {
                    const S* gr = g + (b * T + t) * D;
                    S* gxr = gx + (b * T + t) * D;
                    for (int64_t i = 0; i < D; ++i) {
                        acc[i] += gr[i];
                        gxr[i] += acc[i];
                    }
                }
            }
        });
    const S* px = x.data();
    S* po = out.data();
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t t = 0; t < T; ++t) {
            const S* xr = px + (b * T + t) * D;
            S* or_ = po + (b * T + t) * D;
            if (t == 0) {
                std::copy(xr, xr + D, or_);
            } else {
                const S* prev = po + (b * T + t - 1) * D;
                for (int64_t i = 0; i < D; ++i) or_[i] = prev[i] + xr[i];
            }
        }
    }
    return out;
}

// Exponentially decayed sum along axis 1: c_t = x_t + eta * c_{t-1}.
template <class S>
Tensor<S> decay_axis1(Tensor<S> x, S eta) {
    check(x.rank() == 3, "decay_axis1: expect [B,T,D]");
    const int64_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
    auto out = detail::make_op<S>(
        x.shape(), {x}, [x, eta, B, T, D](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            S* gx = x.grad();
            std::vector<S> acc(D);
            for (int64_t b = 0; b < B; ++b) {
                std::fill(acc.begin(), acc.end(), S(0));
                for (int64_t t = T - 1; t >= 0; --t) {
                    const S* gr = g + (b * T + t) * D;
                    S* gxr = gx + (b * T + t) * D;
                    for (int64_t i = 0; i < D; ++i) {
                        acc[i] = gr[i] + eta * acc[i];
                        gxr[i] += acc[i];
                    }
                }
            }
        });
    const S* px = x.data();
    S* po = out.data();
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t t = 0; t < T; ++t) {
            const S* xr = px + (b * T + t) * D;
            S* or_ = po + (b * T + t) * D;
            if (t == 0) {
                std::copy(xr, xr + D, or_);
            } else {
                const S* prev = po + (b * T + t - 1) * D;
                for (int64_t i = 0; i < D; ++i) or_[i] = xr[i] + eta * prev[i];
            }
        }
    }
    return out;
}

// Interleaved sinusoidal map: even components sin(x*f), odd cos(x*f) with a
// precomputed factor per element. literal_sin applies sin on both branches.
template <class S>
Tensor<S> circle_map(Tensor<S> x, Tensor<S> factors, bool literal_sin = false) {
    check(x.shape() == factors.shape(), "circle_map: factor shape mismatch");
    const int64_t d = x.dim(-1);
    auto out = detail::make_op<S>(
        x.shape(), {x}, [x, factors, d, literal_sin](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            const S* px = x.data();
            const S* pf = factors.data();
            S* gx = x.grad();
            for (int64_t i = 0; i < shape_numel(self.shape); ++i) {
                const S z = px[i] * pf[i];
                const bool use_sin = literal_sin || (i % d) % 2 == 0;
                const S dz = use_sin ? std::cos(z) : -std::sin(z);
                gx[i] += g[i] * dz * pf[i];
            }
        });
    const S* px = x.data();
    const S* pf = factors.data();
    S* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) {
        const S z = px[i] * pf[i];
        const bool use_sin = literal_sin || (i % d) % 2 == 0;
        po[i] = use_sin ? std::sin(z) : std::cos(z);
    }
    return out;
}

// Row-shifted logarithmic compression: out_a = log(1 + (x_a + shift)/s_a)
// with shift = max(0, eps - min_a x_a) per trailing-dim row, which keeps the
// log argument positive for inputs of arbitrary sign.
template <class S>
Tensor<S> log_map(Tensor<S> x, Tensor<S> scales, S eps) {
    const int64_t d = x.dim(-1);
    check(scales.numel() == d, "log_map: scales must be [d]");
    const int64_t rows = x.numel() / d;
    auto out = detail::make_op<S>(
        x.shape(), {x}, [x, scales, rows, d, eps](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            const S* px = x.data();
            const S* ps = scales.data();
            S* gx = x.grad();
            for (int64_t r = 0; r < rows; ++r) {
                const S* xr = px + r * d;
                int64_t amin = 0;
                for (int64_t i = 1; i < d; ++i)
                    if (xr[i] < xr[amin]) amin = i;
                const S shift = std::max(S(0), eps - xr[amin]);
                const S* gr = g + r * d;
                S* gxr = gx + r * d;
                S shift_term = 0;
                for (int64_t i = 0; i < d; ++i) {
                    const S denom = ps[i] + xr[i] + shift;
                    const S gi = gr[i] / denom;
                    gxr[i] += gi;
                    shift_term += gi;
                }
                // d shift / d x_amin = -1 when the shift is active
                if (shift > S(0)) gxr[amin] -= shift_term;
            }
        });
    const S* px = x.data();
    const S* ps = scales.data();
    S* po = out.data();
    for (int64_t r = 0; r < rows; ++r) {
        const S* xr = px + r * d;
        S mn = xr[0];
        for (int64_t i = 1; i < d; ++i) mn = std::min(mn, xr[i]);
        const S shift = std::max(S(0), eps - mn);
        S* or_ = po + r * d;
        for (int64_t i = 0; i < d; ++i)
            or_[i] = std::log(S(1) + (xr[i] + shift) / ps[i]);
    }
    return out;
}

// Band-limited map: beta * x * exp(-beta * x); peak value 1/e at x = 1/beta.
// The left tail grows like e^|beta*x| and would overflow 32-bit floats for
// beta*x below roughly -88, so the argument saturates at kGammaArgFloor:
// beyond it the output is frozen and the gradient is zero.
constexpr double kGammaArgFloor = -30.0;

template <class S>
Tensor<S> gamma_map(Tensor<S> x, S beta) {
    const S floor_arg = static_cast<S>(kGammaArgFloor);
    auto out = detail::make_op<S>(
        x.shape(), {x}, [x, beta, floor_arg](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            const S* px = x.data();
            S* gx = x.grad();
            for (int64_t i = 0; i < shape_numel(self.shape); ++i) {
                const S t = beta * px[i];
                if (t < floor_arg) continue;
                const S e = std::exp(-t);
                gx[i] += g[i] * beta * e * (S(1) - t);
            }
        });
    const S* px = x.data();
    S* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) {
        const S t = std::max(beta * px[i], floor_arg);
        po[i] = t * std::exp(-t);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> sum_all(Tensor<S> x) {
    auto out = detail::make_op<S>(
        {1}, {x}, [x](typename Tensor<S>::Node& self) mutable {
            const S g = (*self.grad)[0];
            S* gx = x.grad();
            for (int64_t i = 0; i < x.numel(); ++i) gx[i] += g;
        });
    S acc = 0;
    const S* px = x.data();
    for (int64_t i = 0; i < x.numel(); ++i) acc += px[i];
    out.data()[0] = acc;
    return out;
}

template <class S>
Tensor<S> mean_all(Tensor<S> x) {
    return scale(sum_all(x), S(1) / static_cast<S>(x.numel()));
}

// Rows normalized to unit L2 length with an epsilon guard in the
// denominator; exactly-zero rows map to zero with zero gradient.
template <class S>
Tensor<S> l2_normalize_rows(Tensor<S> x, S eps) {
    check(x.rank() == 2, "l2_normalize_rows: expect [M,D]");
    const int64_t m = x.dim(0), d = x.dim(1);
    auto norms = std::make_shared<typename Tensor<S>::Buf>(m);
    auto out = detail::make_op<S>(
        x.shape(), {x}, [x, norms, m, d, eps](typename Tensor<S>::Node& self) mutable {
            const S* g = self.grad->data();
            const S* px = x.data();
            S* gx = x.grad();
            for (int64_t r = 0; r < m; ++r) {
                const S n = (*norms)[r];
                if (n == S(0)) continue;
                const S s = n + eps;
                const S* xr = px + r * d;
                const S* gr = g + r * d;
                S dot = 0;
                for (int64_t i = 0; i < d; ++i) dot += gr[i] * xr[i];
                const S c = dot / (n * s * s);
                S* gxr = gx + r * d;
                for (int64_t i = 0; i < d; ++i) gxr[i] += gr[i] / s - xr[i] * c;
            }
        });
    const S* px = x.data();
    S* po = out.data();
    for (int64_t r = 0; r < m; ++r) {
        const S* xr = px + r * d;
        S sq = 0;
        for (int64_t i = 0; i < d; ++i) sq += xr[i] * xr[i];
        const S n = std::sqrt(sq);
        (*norms)[r] = n;
        const S inv = n == S(0) ? S(0) : S(1) / (n + eps);
        for (int64_t i = 0; i < d; ++i) po[r * d + i] = xr[i] * inv;
    }
    return out;
}

// Mean categorical cross-entropy over rows of logits, numerically stable
// log-sum-exp form. labels[r] indexes the true class of row r.
template <class S>
Tensor<S> softmax_xent(Tensor<S> logits, std::shared_ptr<std::vector<int64_t>> labels) {
    check(logits.rank() == 2, "softmax_xent: logits must be [M,C]");
    const int64_t m = logits.dim(0), c = logits.dim(1);
    check(static_cast<int64_t>(labels->size()) == m, "softmax_xent: label count mismatch");
    for (int64_t l : *labels) check(l >= 0 && l < c, "softmax_xent: label out of range");
    auto probs = std::make_shared<typename Tensor<S>::Buf>(logits.numel());
    auto out = detail::make_op<S>(
        {1}, {logits}, [logits, labels, probs, m, c](typename Tensor<S>::Node& self) mutable {
            const S g = (*self.grad)[0] / static_cast<S>(m);
            S* gx = logits.grad();
            const S* p = probs->data();
            for (int64_t r = 0; r < m; ++r) {
                S* gr = gx + r * c;
                const S* pr = p + r * c;
                for (int64_t i = 0; i < c; ++i) gr[i] += g * pr[i];
                gr[(*labels)[r]] -= g;
            }
        });
    const S* px = logits.data();
    S loss = 0;
    for (int64_t r = 0; r < m; ++r) {
        const S* xr = px + r * c;
        S mx = xr[0];
        for (int64_t i = 1; i < c; ++i) mx = std::max(mx, xr[i]);
        S sum = 0;
        S* pr = probs->data() + r * c;
        for (int64_t i = 0; i < c; ++i) {
            pr[i] = std::exp(xr[i] - mx);
            sum += pr[i];
        }
        for (int64_t i = 0; i < c; ++i) pr[i] /= sum;
        loss += std::log(sum) + mx - xr[(*labels)[r]];
    }
    out.data()[0] = loss / static_cast<S>(m);
    return out;
}

// ---------------------------------------------------------------------------
// Reverse pass
// ---------------------------------------------------------------------------

template <class S>
void backward(Tensor<S> loss) {
    check(loss.defined() && loss.numel() == 1, "backward: loss must be a scalar tensor");
    using Node = typename Tensor<S>::Node;
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.ensure_grad();
    (*loss.node()->grad)[0] += S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->grad) n->backprop(*n);
    }
}

}  // namespace dcan
