// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense f64 tensor with reverse-mode autodiff.
//
// Tensors are immutable once created. Differentiable results are recorded on
// a Tape as backward closures; Tape::backward replays them in reverse and
// accumulates gradients into every requires-grad node. A tape and the tensors
// recorded on it belong to one thread; independent tapes may run on different
// threads concurrently. Parallelism lives inside the kernels, not across the
// graph.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "ret2/common.hpp"

namespace ret2 {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);

class Tape;

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized like data iff requires_grad
    bool requires_grad = false;
    Tape* tape = nullptr;
};

class Tensor {
  public:
    Tensor() = default;

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t numel() const { return static_cast<int64_t>(node_->data.size()); }
    int64_t rows() const;
    int64_t cols() const;
    const std::vector<double>& data() const { return node_->data; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    const std::vector<double>& grad() const;
    Tape* tape() const { return node_ ? node_->tape : nullptr; }

    double value() const;                    // scalar tensors only
    double at(int64_t i) const { return node_->data[static_cast<size_t>(i)]; }
    double at(int64_t r, int64_t c) const { return node_->data[static_cast<size_t>(r * cols() + c)]; }
    bool is_finite() const { return all_finite(node_->data); }

  private:
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<TensorNode> node_;

    friend class Tape;
    friend struct OpAccess;
};

class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // A learnable tensor whose gradient this tape will populate.
    Tensor leaf(Shape shape, std::vector<double> data);

    // Reverse pass from a scalar loss recorded on this tape. Calling it a
    // second time without reset() is an error.
    void backward(const Tensor& loss);

    // Zero every gradient and re-arm backward; the recorded graph is kept, so
    // replaying yields bitwise-identical gradients.
    void reset();

    size_t num_ops() const { return steps_.size(); }
    bool backward_done() const { return done_; }

  private:
    std::vector<std::function<void()>> steps_;
    std::vector<std::shared_ptr<TensorNode>> nodes_;
    bool done_ = false;

    friend struct OpAccess;
};

// Constants (no gradient participation).
Tensor constant(Shape shape, std::vector<double> data);
Tensor scalar_const(double v);
Tensor zeros(Shape shape);
Tensor full(Shape shape, double v);
Tensor randn(Shape shape, std::mt19937_64& rng, double stddev = 1.0);

// Differentiable operations. Shapes are validated; mismatches throw ShapeError.
Tensor matmul(const Tensor& a, const Tensor& b);             // [m,k]x[k,n] -> [m,n]
Tensor transpose(const Tensor& a);                           // [m,n] -> [n,m]
Tensor add(const Tensor& a, const Tensor& b);                // same shape
Tensor sub(const Tensor& a, const Tensor& b);                // same shape
Tensor hadamard(const Tensor& a, const Tensor& b);           // same shape
Tensor scale(const Tensor& a, double c);
Tensor sigmoid(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor softmax_rows(const Tensor& a);                        // [m,n], rows sum to 1
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);  // last axis, eps 1e-5
Tensor concat_rows(const std::vector<Tensor>& parts);        // [m_i,n] -> [sum m_i, n]
Tensor concat_cols(const std::vector<Tensor>& parts);        // [m,n_i] -> [m, sum n_i]
Tensor slice_cols(const Tensor& a, int64_t start, int64_t width);
Tensor sum_rows(const Tensor& a);                            // [m,n] -> [n]
Tensor sum_all(const Tensor& a);                             // -> scalar
Tensor mean_all(const Tensor& a);                            // -> scalar
Tensor dot(const Tensor& a, const Tensor& b);                // [n],[n] -> scalar
Tensor add_rowvec(const Tensor& x, const Tensor& v);         // [m,n] + [n]
Tensor logsumexp_rows(const Tensor& a);                      // [m,n] -> [m]
Tensor take_diag(const Tensor& a);                           // [n,n] -> [n]
Tensor div_by_scalar(const Tensor& x, const Tensor& t);      // t scalar tensor
Tensor sum_rowmax(const Tensor& a);                          // sum_i max_j a_ij -> scalar
Tensor stack_rows(const std::vector<Tensor>& rows);          // B x [n] -> [B,n]
Tensor stack_scalars(const std::vector<Tensor>& cells, int64_t rows, int64_t cols);

inline constexpr double kLayerNormEps = 1e-5;

}  // namespace ret2
