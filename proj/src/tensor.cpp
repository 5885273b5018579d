// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0

#include "geomtext/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace geomtext {

namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_seq{1};

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) {
        if (d == 0) fail("tensor: zero-sized dimension in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

detail::ImplPtr make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        fail("tensor: shape " + shape_str(shape) + " does not match " +
             std::to_string(data.size()) + " values");
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    impl->is_leaf = true;
    impl->seq = g_seq.fetch_add(1);
    return impl;
}

/// Builds an op result. Records graph structure only when grad mode is on
/// and at least one parent requires gradients.
Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                   std::vector<detail::ImplPtr> parents,
                   std::function<void(detail::TensorImpl&)> backward_fn) {
    bool track = false;
    if (g_grad_enabled) {
        for (const auto& p : parents) {
            if (p && p->requires_grad) {
                track = true;
                break;
            }
        }
    }
    auto impl = make_leaf(std::move(shape), std::move(data), track);
    if (track) {
        impl->is_leaf = false;
        impl->op = op;
        impl->parents = std::move(parents);
        impl->backward_fn = std::move(backward_fn);
    }
    return Tensor(impl);
}

bool wants(const detail::ImplPtr& p) { return p->requires_grad; }

void check_rank12(const Tensor& t, const char* op) {
    if (!t.defined()) fail(std::string(op) + ": undefined tensor");
    if (t.rank() == 0 || t.rank() > 2) {
        fail(std::string(op) + ": expected rank 1 or 2, got shape " + shape_str(t.shape()));
    }
}

// Last-axis view: rows r of width c (rank-1 is a single row).
std::pair<std::size_t, std::size_t> row_view(const Tensor& t) {
    if (t.rank() == 1) return {1, t.shape()[0]};
    return {t.shape()[0], t.shape()[1]};
}

void matmul_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) {
    std::size_t n = shape_numel(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0), false));
}

Tensor Tensor::full(Shape shape, double value) {
    std::size_t n = shape_numel(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, value), false));
}

Tensor Tensor::from(std::vector<double> data, Shape shape) {
    return Tensor(make_leaf(std::move(shape), std::move(data), false));
}

Tensor Tensor::scalar(double value) { return from({value}, {1}); }

Tensor Tensor::param(std::vector<double> data, Shape shape) {
    return Tensor(make_leaf(std::move(shape), std::move(data), true));
}

const Shape& Tensor::shape() const {
    if (!impl_) fail("tensor: undefined");
    return impl_->shape;
}

std::size_t Tensor::numel() const { return impl_ ? impl_->numel() : 0; }

std::size_t Tensor::rows() const { return row_view(*this).first; }
std::size_t Tensor::cols() const { return row_view(*this).second; }

const std::vector<double>& Tensor::data() const {
    if (!impl_) fail("tensor: undefined");
    return impl_->data;
}

std::vector<double>& Tensor::mutable_data() {
    if (!impl_) fail("tensor: undefined");
    return impl_->data;
}

double Tensor::value() const {
    if (numel() != 1) fail("tensor: value() on non-scalar of shape " + shape_str(shape()));
    return impl_->data[0];
}

double Tensor::at(std::size_t i) const {
    if (i >= numel()) throw std::out_of_range("tensor: flat index out of range");
    return impl_->data[i];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    auto [r, c] = row_view(*this);
    if (i >= r || j >= c) throw std::out_of_range("tensor: index out of range");
    return impl_->data[i * c + j];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) fail("tensor: no gradient present");
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (impl_ && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank12(a, "matmul");
    check_rank12(b, "matmul");
    if (a.rank() != 2 || b.rank() != 2) {
        fail("matmul: expected rank-2 operands, got " + shape_str(a.shape()) + " and " +
             shape_str(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2) {
        fail("matmul: inner dimensions differ, " + shape_str(a.shape()) + " vs " +
             shape_str(b.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    matmul_acc(a.data().data(), b.data().data(), out.data(), m, k, n);

    auto ai = a.impl(), bi = b.impl();
    return make_result(
        {m, n}, std::move(out), "matmul", {ai, bi},
        [ai, bi, m, k, n](detail::TensorImpl& self) {
            const double* g = self.grad.data();
            if (wants(ai)) {
                double* da = ai->grad.data();
                const double* B = bi->data.data();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        const double* grow = g + i * n;
                        const double* brow = B + kk * n;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        da[i * k + kk] += acc;
                    }
                }
            }
            if (wants(bi)) {
                double* db = bi->grad.data();
                const double* A = ai->data.data();
                for (std::size_t i = 0; i < m; ++i) {
                    const double* arow = A + i * k;
                    const double* grow = g + i * n;
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const double av = arow[kk];
                        double* dbrow = db + kk * n;
                        for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * grow[j];
                    }
                }
            }
        });
}

namespace {

enum class BroadcastKind { None, VecOnRight, VecOnLeft };

// add/mul share a shape rule: equal shapes, or matrix (r x c) with vector (c).
BroadcastKind ewise_kind(const Tensor& a, const Tensor& b, const char* op) {
    check_rank12(a, op);
    check_rank12(b, op);
    if (a.shape() == b.shape()) return BroadcastKind::None;
    if (a.rank() == 2 && b.rank() == 1 && a.shape()[1] == b.shape()[0])
        return BroadcastKind::VecOnRight;
    if (a.rank() == 1 && b.rank() == 2 && b.shape()[1] == a.shape()[0])
        return BroadcastKind::VecOnLeft;
    fail(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
         shape_str(b.shape()));
}

template <class Fwd, class BwdSame, class BwdBroadcast>
Tensor ewise_binary(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, BwdSame bwd_same,
                    BwdBroadcast bwd_vec) {
    const BroadcastKind kind = ewise_kind(a, b, op);
    const Tensor& mat = (kind == BroadcastKind::VecOnLeft) ? b : a;
    const Tensor& vec = (kind == BroadcastKind::VecOnLeft) ? a : b;
    const auto [r, c] = row_view(mat);

    std::vector<double> out(mat.numel());
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    if (kind == BroadcastKind::None) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(pa[i], pb[i]);
    } else {
        const double* pm = mat.data().data();
        const double* pv = vec.data().data();
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                const double m = pm[i * c + j], v = pv[j];
                out[i * c + j] =
                    (kind == BroadcastKind::VecOnLeft) ? fwd(v, m) : fwd(m, v);
            }
        }
    }

    auto ai = a.impl(), bi = b.impl();
    auto mi = mat.impl(), vi = vec.impl();
    return make_result(
        mat.shape(), std::move(out), op, {ai, bi},
        [=](detail::TensorImpl& self) {
            const double* g = self.grad.data();
            if (kind == BroadcastKind::None) {
                bwd_same(g, ai, bi);
                return;
            }
            bwd_vec(g, mi, vi, r, c, kind == BroadcastKind::VecOnLeft);
        });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return ewise_binary(
        a, b, "add", [](double x, double y) { return x + y; },
        [](const double* g, const detail::ImplPtr& ai, const detail::ImplPtr& bi) {
            const std::size_t n = ai->numel();
            if (wants(ai))
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += g[i];
            if (wants(bi))
                for (std::size_t i = 0; i < n; ++i) bi->grad[i] += g[i];
        },
        [](const double* g, const detail::ImplPtr& mi, const detail::ImplPtr& vi, std::size_t r,
           std::size_t c, bool) {
            if (wants(mi))
                for (std::size_t i = 0; i < r * c; ++i) mi->grad[i] += g[i];
            if (wants(vi)) {
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) vi->grad[j] += g[i * c + j];
            }
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        check_rank12(a, "sub");
        check_rank12(b, "sub");
        fail("sub: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    auto ai = a.impl(), bi = b.impl();
    return make_result(a.shape(), std::move(out), "sub", {ai, bi},
                       [ai, bi](detail::TensorImpl& self) {
                           const double* g = self.grad.data();
                           const std::size_t n = self.numel();
                           if (wants(ai))
                               for (std::size_t i = 0; i < n; ++i) ai->grad[i] += g[i];
                           if (wants(bi))
                               for (std::size_t i = 0; i < n; ++i) bi->grad[i] -= g[i];
                       });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return ewise_binary(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](const double* g, const detail::ImplPtr& ai, const detail::ImplPtr& bi) {
            const std::size_t n = ai->numel();
            if (wants(ai))
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += g[i] * bi->data[i];
            if (wants(bi))
                for (std::size_t i = 0; i < n; ++i) bi->grad[i] += g[i] * ai->data[i];
        },
        [](const double* g, const detail::ImplPtr& mi, const detail::ImplPtr& vi, std::size_t r,
           std::size_t c, bool) {
            if (wants(mi)) {
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        mi->grad[i * c + j] += g[i * c + j] * vi->data[j];
            }
            if (wants(vi)) {
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        vi->grad[j] += g[i * c + j] * mi->data[i * c + j];
            }
        });
}

Tensor scale(const Tensor& a, double s) {
    check_rank12(a, "scale");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
    auto ai = a.impl();
    return make_result(a.shape(), std::move(out), "scale", {ai},
                       [ai, s](detail::TensorImpl& self) {
                           if (!wants(ai)) return;
                           for (std::size_t i = 0; i < self.numel(); ++i)
                               ai->grad[i] += self.grad[i] * s;
                       });
}

Tensor transpose(const Tensor& a) {
    check_rank12(a, "transpose");
    if (a.rank() != 2) fail("transpose: expected rank-2, got " + shape_str(a.shape()));
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
    auto ai = a.impl();
    return make_result({c, r}, std::move(out), "transpose", {ai},
                       [ai, r, c](detail::TensorImpl& self) {
                           if (!wants(ai)) return;
                           const double* g = self.grad.data();
                           for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j)
                                   ai->grad[i * c + j] += g[j * r + i];
                       });
}

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
    check_rank12(a, "concat");
    check_rank12(b, "concat");
    if (a.rank() != b.rank()) {
        fail("concat: rank mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    if (axis > 1 || (a.rank() == 1 && axis != 0)) fail("concat: bad axis");

    Shape out_shape;
    std::vector<double> out;
    if (a.rank() == 1) {
        out_shape = {a.numel() + b.numel()};
        out = a.data();
        out.insert(out.end(), b.data().begin(), b.data().end());
    } else if (axis == 0) {
        if (a.shape()[1] != b.shape()[1]) {
            fail("concat axis 0: column counts differ, " + shape_str(a.shape()) + " vs " +
                 shape_str(b.shape()));
        }
        out_shape = {a.shape()[0] + b.shape()[0], a.shape()[1]};
        out = a.data();
        out.insert(out.end(), b.data().begin(), b.data().end());
    } else {
        if (a.shape()[0] != b.shape()[0]) {
            fail("concat axis 1: row counts differ, " + shape_str(a.shape()) + " vs " +
                 shape_str(b.shape()));
        }
        const std::size_t r = a.shape()[0], c1 = a.shape()[1], c2 = b.shape()[1];
        out_shape = {r, c1 + c2};
        out.resize(r * (c1 + c2));
        for (std::size_t i = 0; i < r; ++i) {
            std::copy_n(a.data().data() + i * c1, c1, out.data() + i * (c1 + c2));
            std::copy_n(b.data().data() + i * c2, c2, out.data() + i * (c1 + c2) + c1);
        }
    }

    auto ai = a.impl(), bi = b.impl();
    const std::size_t na = a.numel();
    const bool rowwise = (a.rank() == 1) || axis == 0;
    const std::size_t r = a.rank() == 2 ? a.shape()[0] : 1;
    const std::size_t c1 = a.rank() == 2 ? a.shape()[1] : a.numel();
    const std::size_t c2 = b.rank() == 2 ? b.shape()[1] : b.numel();
    return make_result(std::move(out_shape), std::move(out), "concat", {ai, bi},
                       [=](detail::TensorImpl& self) {
                           const double* g = self.grad.data();
                           if (rowwise) {
                               if (wants(ai))
                                   for (std::size_t i = 0; i < na; ++i) ai->grad[i] += g[i];
                               if (wants(bi))
                                   for (std::size_t i = 0; i < bi->numel(); ++i)
                                       bi->grad[i] += g[na + i];
                               return;
                           }
                           for (std::size_t i = 0; i < r; ++i) {
                               const double* grow = g + i * (c1 + c2);
                               if (wants(ai))
                                   for (std::size_t j = 0; j < c1; ++j)
                                       ai->grad[i * c1 + j] += grow[j];
                               if (wants(bi))
                                   for (std::size_t j = 0; j < c2; ++j)
                                       bi->grad[i * c2 + j] += grow[c1 + j];
                           }
                       });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len) {
    check_rank12(a, "slice");
    if (len == 0) fail("slice: empty range");
    if (axis > 1 || (a.rank() == 1 && axis != 0)) fail("slice: bad axis");

    Shape out_shape;
    std::vector<double> out;
    std::size_t r = 1, c = a.numel();
    if (a.rank() == 2) {
        r = a.shape()[0];
        c = a.shape()[1];
    }
    if (a.rank() == 1 || axis == 0) {
        const std::size_t limit = (a.rank() == 1) ? c : r;
        if (start + len > limit) {
            fail("slice axis 0: range [" + std::to_string(start) + ", " +
                 std::to_string(start + len) + ") exceeds " + shape_str(a.shape()));
        }
        if (a.rank() == 1) {
            out_shape = {len};
            out.assign(a.data().begin() + start, a.data().begin() + start + len);
        } else {
            out_shape = {len, c};
            out.assign(a.data().begin() + start * c, a.data().begin() + (start + len) * c);
        }
    } else {
        if (start + len > c) {
            fail("slice axis 1: range [" + std::to_string(start) + ", " +
                 std::to_string(start + len) + ") exceeds " + shape_str(a.shape()));
        }
        out_shape = {r, len};
        out.resize(r * len);
        for (std::size_t i = 0; i < r; ++i)
            std::copy_n(a.data().data() + i * c + start, len, out.data() + i * len);
    }

    auto ai = a.impl();
    const bool rowwise = (a.rank() == 1) || axis == 0;
    const std::size_t width = (a.rank() == 1) ? 1 : c;
    return make_result(std::move(out_shape), std::move(out), "slice", {ai},
                       [=](detail::TensorImpl& self) {
                           if (!wants(ai)) return;
                           const double* g = self.grad.data();
                           if (rowwise) {
                               const std::size_t w = width;
                               for (std::size_t i = 0; i < len * w; ++i)
                                   ai->grad[start * w + i] += g[i];
                           } else {
                               for (std::size_t i = 0; i < r; ++i)
                                   for (std::size_t j = 0; j < len; ++j)
                                       ai->grad[i * c + start + j] += g[i * len + j];
                           }
                       });
}

Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& indices) {
    check_rank12(table, "gather_rows");
    if (table.rank() != 2) fail("gather_rows: table must be rank-2");
    const std::size_t v = table.shape()[0], d = table.shape()[1];
    for (std::size_t idx : indices) {
        if (idx >= v) {
            throw std::out_of_range("gather_rows: index " + std::to_string(idx) +
                                    " out of range for table with " + std::to_string(v) + " rows");
        }
    }
    if (indices.empty()) fail("gather_rows: empty index list");
    std::vector<double> out(indices.size() * d);
    for (std::size_t i = 0; i < indices.size(); ++i)
        std::copy_n(table.data().data() + indices[i] * d, d, out.data() + i * d);

    auto ti = table.impl();
    auto idx_copy = indices;
    return make_result({indices.size(), d}, std::move(out), "gather_rows", {ti},
                       [ti, idx_copy, d](detail::TensorImpl& self) {
                           if (!wants(ti)) return;
                           const double* g = self.grad.data();
                           for (std::size_t i = 0; i < idx_copy.size(); ++i) {
                               double* trow = ti->grad.data() + idx_copy[i] * d;
                               for (std::size_t j = 0; j < d; ++j) trow[j] += g[i * d + j];
                           }
                       });
}

Tensor reshape(const Tensor& a, Shape shape) {
    check_rank12(a, "reshape");
    if (shape_numel(shape) != a.numel()) {
        fail("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    auto ai = a.impl();
    return make_result(std::move(shape), a.data(), "reshape", {ai},
                       [ai](detail::TensorImpl& self) {
                           if (!wants(ai)) return;
                           for (std::size_t i = 0; i < self.numel(); ++i)
                               ai->grad[i] += self.grad[i];
                       });
}

namespace {

template <class Fwd, class Dfn>
Tensor ewise_unary(const Tensor& a, const char* op, Fwd fwd, Dfn dfn) {
    check_rank12(a, op);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i]);
    auto ai = a.impl();
    return make_result(a.shape(), std::move(out), op, {ai},
                       [ai, dfn](detail::TensorImpl& self) {
                           if (!wants(ai)) return;
                           for (std::size_t i = 0; i < self.numel(); ++i)
                               ai->grad[i] += self.grad[i] * dfn(ai->data[i]);
                       });
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tensor relu(const Tensor& a) {
    return ewise_unary(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
    return ewise_unary(
        a, "gelu", [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
        [](double x) {
            const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
        });
}

Tensor abs(const Tensor& a) {
    return ewise_unary(
        a, "abs", [](double x) { return std::fabs(x); },
        [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor softmax(const Tensor& a) {
    check_rank12(a, "softmax");
    const auto [r, c] = row_view(a);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = a.data().data() + i * c;
        double m = x[0];
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, x[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] = std::exp(x[j] - m);
            s += out[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= s;
    }
    auto ai = a.impl();
    return make_result(a.shape(), std::move(out), "softmax", {ai},
                       [ai, r = r, c = c](detail::TensorImpl& self) {
                           if (!wants(ai)) return;
                           const double* y = self.data.data();
                           const double* g = self.grad.data();
                           for (std::size_t i = 0; i < r; ++i) {
                               double dot = 0.0;
                               for (std::size_t j = 0; j < c; ++j)
                                   dot += g[i * c + j] * y[i * c + j];
                               for (std::size_t j = 0; j < c; ++j)
                                   ai->grad[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
                           }
                       });
}

Tensor log_softmax(const Tensor& a) {
    check_rank12(a, "log_softmax");
    const auto [r, c] = row_view(a);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = a.data().data() + i * c;
        double m = x[0];
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, x[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += std::exp(x[j] - m);
        const double lse = m + std::log(s);
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[j] - lse;
    }
    auto ai = a.impl();
    return make_result(a.shape(), std::move(out), "log_softmax", {ai},
                       [ai, r = r, c = c](detail::TensorImpl& self) {
                           if (!wants(ai)) return;
                           const double* y = self.data.data();
                           const double* g = self.grad.data();
                           for (std::size_t i = 0; i < r; ++i) {
                               double gsum = 0.0;
                               for (std::size_t j = 0; j < c; ++j) gsum += g[i * c + j];
                               for (std::size_t j = 0; j < c; ++j)
                                   ai->grad[i * c + j] +=
                                       g[i * c + j] - std::exp(y[i * c + j]) * gsum;
                           }
                       });
}

Tensor layer_norm(const Tensor& a) {
    check_rank12(a, "layer_norm");
    const auto [r, c] = row_view(a);
    std::vector<double> out(a.numel());
    std::vector<double> inv_std(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = a.data().data() + i * c;
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += x[j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
        var /= static_cast<double>(c);
        inv_std[i] = 1.0 / std::sqrt(var + kLayerNormEpsilon);
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = (x[j] - mu) * inv_std[i];
    }
    auto ai = a.impl();
    return make_result(
        a.shape(), std::move(out), "layer_norm", {ai},
        [ai, inv_std = std::move(inv_std), r = r, c = c](detail::TensorImpl& self) {
            if (!wants(ai)) return;
            const double* y = self.data.data();
            const double* g = self.grad.data();
            const double n = static_cast<double>(c);
            for (std::size_t i = 0; i < r; ++i) {
                double gmean = 0.0, gymean = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    gmean += g[i * c + j];
                    gymean += g[i * c + j] * y[i * c + j];
                }
                gmean /= n;
                gymean /= n;
                for (std::size_t j = 0; j < c; ++j)
                    ai->grad[i * c + j] +=
                        inv_std[i] * (g[i * c + j] - gmean - y[i * c + j] * gymean);
            }
        });
}

Tensor mean(const Tensor& a, std::size_t axis) {
    check_rank12(a, "mean");
    if (a.rank() != 2) fail("mean: expected rank-2 input, got " + shape_str(a.shape()));
    if (axis > 1) fail("mean: bad axis");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    const std::size_t out_len = (axis == 0) ? c : r;
    const double denom = static_cast<double>(axis == 0 ? r : c);
    std::vector<double> out(out_len, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += a.data()[i * c + j];
    for (double& v : out) v /= denom;
    auto ai = a.impl();
    return make_result({out_len}, std::move(out), "mean", {ai},
                       [ai, axis, r, c, denom](detail::TensorImpl& self) {
                           if (!wants(ai)) return;
                           const double* g = self.grad.data();
                           for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j)
                                   ai->grad[i * c + j] += g[axis == 0 ? j : i] / denom;
                       });
}

Tensor sum_all(const Tensor& a) {
    check_rank12(a, "sum_all");
    double s = 0.0;
    for (double v : a.data()) s += v;
    auto ai = a.impl();
    return make_result({1}, {s}, "sum_all", {ai}, [ai](detail::TensorImpl& self) {
        if (!wants(ai)) return;
        const double g = self.grad[0];
        for (double& dv : ai->grad) dv += g;
    });
}

Tensor mean_all(const Tensor& a) {
    check_rank12(a, "mean_all");
    double s = 0.0;
    for (double v : a.data()) s += v;
    const double denom = static_cast<double>(a.numel());
    auto ai = a.impl();
    return make_result({1}, {s / denom}, "mean_all", {ai}, [ai, denom](detail::TensorImpl& self) {
        if (!wants(ai)) return;
        const double g = self.grad[0] / denom;
        for (double& dv : ai->grad) dv += g;
    });
}

Tensor squared_l2(const Tensor& a) {
    check_rank12(a, "squared_l2");
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    auto ai = a.impl();
    return make_result({1}, {s}, "squared_l2", {ai}, [ai](detail::TensorImpl& self) {
        if (!wants(ai)) return;
        const double g = self.grad[0];
        for (std::size_t i = 0; i < ai->numel(); ++i) ai->grad[i] += 2.0 * ai->data[i] * g;
    });
}

namespace {

double row_norm(const double* x, std::size_t c) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += x[j] * x[j];
    return std::sqrt(s);
}

}  // namespace

Tensor cosine_similarity_rows(const Tensor& a, const Tensor& b) {
    check_rank12(a, "cosine_similarity_rows");
    check_rank12(b, "cosine_similarity_rows");
    if (a.shape() != b.shape()) {
        fail("cosine_similarity_rows: shapes differ, " + shape_str(a.shape()) + " vs " +
             shape_str(b.shape()));
    }
    const auto [r, c] = row_view(a);
    std::vector<double> out(r), na(r), nb(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = a.data().data() + i * c;
        const double* y = b.data().data() + i * c;
        na[i] = row_norm(x, c);
        nb[i] = row_norm(y, c);
        if (na[i] == 0.0 || nb[i] == 0.0) {
            fail("cosine_similarity_rows: degenerate embedding, zero-norm row " +
                 std::to_string(i));
        }
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += x[j] * y[j];
        out[i] = dot / (na[i] * nb[i]);
    }
    auto ai = a.impl(), bi = b.impl();
    return make_result(
        {r}, std::move(out), "cosine_similarity_rows", {ai, bi},
        [ai, bi, na = std::move(na), nb = std::move(nb), r = r, c = c](detail::TensorImpl& self) {
            const double* g = self.grad.data();
            const double* cosv = self.data.data();
            for (std::size_t i = 0; i < r; ++i) {
                const double* x = ai->data.data() + i * c;
                const double* y = bi->data.data() + i * c;
                const double inv = 1.0 / (na[i] * nb[i]);
                if (wants(ai)) {
                    for (std::size_t j = 0; j < c; ++j)
                        ai->grad[i * c + j] +=
                            g[i] * (y[j] * inv - cosv[i] * x[j] / (na[i] * na[i]));
                }
                if (wants(bi)) {
                    for (std::size_t j = 0; j < c; ++j)
                        bi->grad[i * c + j] +=
                            g[i] * (x[j] * inv - cosv[i] * y[j] / (nb[i] * nb[i]));
                }
            }
        });
}

Tensor l2_normalize_rows(const Tensor& a) {
    check_rank12(a, "l2_normalize_rows");
    const auto [r, c] = row_view(a);
    std::vector<double> out(a.numel()), norms(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = a.data().data() + i * c;
        norms[i] = row_norm(x, c);
        if (norms[i] == 0.0) {
            fail("l2_normalize_rows: degenerate embedding, zero-norm row " + std::to_string(i));
        }
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[j] / norms[i];
    }
    auto ai = a.impl();
    return make_result(a.shape(), std::move(out), "l2_normalize_rows", {ai},
                       [ai, norms = std::move(norms), r = r, c = c](detail::TensorImpl& self) {
                           if (!wants(ai)) return;
                           const double* y = self.data.data();
                           const double* g = self.grad.data();
                           for (std::size_t i = 0; i < r; ++i) {
                               double dot = 0.0;
                               for (std::size_t j = 0; j < c; ++j)
                                   dot += g[i * c + j] * y[i * c + j];
                               for (std::size_t j = 0; j < c; ++j)
                                   ai->grad[i * c + j] +=
                                       (g[i * c + j] - dot * y[i * c + j]) / norms[i];
                           }
                       });
}

Tensor nll_rows(const Tensor& logp, const std::vector<std::size_t>& targets) {
    check_rank12(logp, "nll_rows");
    const auto [r, c] = row_view(logp);
    if (targets.size() != r) {
        fail("nll_rows: " + std::to_string(targets.size()) + " targets for " + std::to_string(r) +
             " rows");
    }
    std::vector<double> out(r);
    for (std::size_t i = 0; i < r; ++i) {
        if (targets[i] >= c) {
            throw std::out_of_range("nll_rows: target " + std::to_string(targets[i]) +
                                    " out of range for " + std::to_string(c) + " classes");
        }
        out[i] = -logp.data()[i * c + targets[i]];
    }
    auto ai = logp.impl();
    auto tcopy = targets;
    return make_result({r}, std::move(out), "nll_rows", {ai},
                       [ai, tcopy, c = c](detail::TensorImpl& self) {
                           if (!wants(ai)) return;
                           for (std::size_t i = 0; i < tcopy.size(); ++i)
                               ai->grad[i * c + tcopy[i]] -= self.grad[i];
                       });
}

// ---- backward ---------------------------------------------------------------

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        fail("backward: loss must be a defined scalar tensor");
    }
    auto root = loss.impl();
    if (!root->requires_grad) {
        fail("backward: loss was not produced through taped ops (no gradient path)");
    }

    // Collect every requires-grad node reachable through parent edges.
    std::vector<detail::TensorImpl*> order;
    std::unordered_set<detail::TensorImpl*> seen;
    std::vector<detail::TensorImpl*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        detail::TensorImpl* node = stack.back();
        stack.pop_back();
        order.push_back(node);
        for (const auto& p : node->parents) {
            if (p && p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }

    // Reverse creation order is a valid reverse-topological order: every op
    // node was created after all of its inputs.
    std::sort(order.begin(), order.end(),
              [](const detail::TensorImpl* a, const detail::TensorImpl* b) {
                  return a->seq > b->seq;
              });

    // Intermediate gradients are transient per backward call; leaf gradients
    // persist and accumulate.
    for (detail::TensorImpl* node : order) {
        if (node->is_leaf) {
            if (node->grad.empty()) node->grad.assign(node->numel(), 0.0);
        } else {
            node->grad.assign(node->numel(), 0.0);
        }
    }

    root->grad[0] += 1.0;
    for (detail::TensorImpl* node : order) {
        if (node->backward_fn) node->backward_fn(*node);
    }
}

}  // namespace geomtext
