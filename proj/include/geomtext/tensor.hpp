// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace geomtext {

using Shape = std::vector<std::size_t>;

namespace detail {

/// One recorded node of the reverse-mode computation graph. The graph is a
/// distributed tape: nodes are created in execution order (seq), each node
/// only references earlier nodes, and backward() replays them newest-first.
struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated lazily; persistent on leaves
    bool requires_grad = false;
    bool is_leaf = true;
    std::uint64_t seq = 0;
    const char* op = "leaf";
    std::vector<std::shared_ptr<TensorImpl>> parents;
    // Reads this->grad, accumulates into requires-grad parents.
    std::function<void(TensorImpl&)> backward_fn;

    std::size_t numel() const { return data.size(); }
};

using ImplPtr = std::shared_ptr<TensorImpl>;

}  // namespace detail

/**
 * Dense multi-dimensional array of 64-bit reals with optional gradient and
 * a recorded computation graph. Value semantics over a shared buffer: copies
 * alias the same storage. Once created a tensor's values are immutable
 * except through mutable_data(), which is reserved for parameter
 * initialization and optimizer updates; gradients accumulate additively
 * until zero_grad().
 */
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor from(std::vector<double> data, Shape shape);
    static Tensor scalar(double value);
    /// Leaf with requires_grad set: a trainable parameter.
    static Tensor param(std::vector<double> data, Shape shape);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;
    /// Row/column count under the rank<=2 convention (rank-1 is one row).
    std::size_t rows() const;
    std::size_t cols() const;

    const std::vector<double>& data() const;
    std::vector<double>& mutable_data();
    double value() const;  // numel()==1 only
    double at(std::size_t i) const;
    double at(std::size_t i, std::size_t j) const;

    bool requires_grad() const;
    bool has_grad() const;
    const std::vector<double>& grad() const;  // throws if no gradient present
    void zero_grad();

    detail::ImplPtr impl() const { return impl_; }
    explicit Tensor(detail::ImplPtr impl) : impl_(std::move(impl)) {}

private:
    detail::ImplPtr impl_;
};

/// While alive, suppresses graph recording: ops produce constant tensors.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// ---- forward ops ----------------------------------------------------------
// Shape contracts throw std::invalid_argument with the offending dimensions.

Tensor matmul(const Tensor& a, const Tensor& b);
/// Elementwise add; also broadcasts a rank-1 vector of length c across the
/// rows of an (r x c) matrix (either operand side).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise multiply with the same row-broadcast rule as add().
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor transpose(const Tensor& a);
/// axis 0 stacks rows, axis 1 concatenates columns (rank-2).
Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len);
/// Embedding lookup: rows of `table` selected by `indices`.
Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& indices);
Tensor reshape(const Tensor& a, Shape shape);

Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor abs(const Tensor& a);
/// Softmax over the last axis, computed with max subtraction.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);
/// Layer normalization over the last axis, epsilon 1e-5, no affine part.
Tensor layer_norm(const Tensor& a);

/// Mean over one axis of a rank-2 tensor (axis 0: column means).
Tensor mean(const Tensor& a, std::size_t axis);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
/// Sum of squares of all entries.
Tensor squared_l2(const Tensor& a);
/// Row-wise cosine similarity of two equal-shape matrices -> rank-1 vector.
Tensor cosine_similarity_rows(const Tensor& a, const Tensor& b);
/// Each row divided by its L2 norm; zero rows are a contract error.
Tensor l2_normalize_rows(const Tensor& a);
/// Negative log probability picked per row from log-softmax output:
/// out[i] = -logp[i, targets[i]] (cross-entropy from log-softmax).
Tensor nll_rows(const Tensor& logp, const std::vector<std::size_t>& targets);

/// Runs reverse-mode accumulation from a scalar loss into every reachable
/// requires-grad leaf. Leaf gradients add up across calls until zeroed.
void backward(const Tensor& loss);

constexpr double kLayerNormEpsilon = 1e-5;

}  // namespace geomtext
