// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0

#include "ret2/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ret2/kernels.hpp"

namespace ret2 {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        require(d > 0, "tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

int64_t Tensor::rows() const {
    require(node_ && node_->shape.size() == 2, "rows() needs a 2-d tensor");
    return node_->shape[0];
}

int64_t Tensor::cols() const {
    require(node_ && node_->shape.size() == 2, "cols() needs a 2-d tensor");
    return node_->shape[1];
}

const std::vector<double>& Tensor::grad() const {
    require(node_ != nullptr, "grad() on an undefined tensor");
    if (!node_->requires_grad) throw Error("grad() on a tensor that does not require grad", 4);
    return node_->grad;
}

double Tensor::value() const {
    require(node_ && node_->data.size() == 1, "value() needs a scalar tensor");
    return node_->data[0];
}

// Gives op implementations access to node internals and tape recording.
struct OpAccess {
    static std::shared_ptr<TensorNode> node(const Tensor& t) { return t.node_; }

    static Tensor make(Shape shape, std::vector<double> data, Tape* tape) {
        auto n = std::make_shared<TensorNode>();
        require(shape_numel(shape) == static_cast<int64_t>(data.size()),
                "tensor data size does not match shape");
        n->shape = std::move(shape);
        n->data = std::move(data);
        n->tape = tape;
        if (tape != nullptr) {
            n->requires_grad = true;
            n->grad.assign(n->data.size(), 0.0);
            tape->nodes_.push_back(n);
        }
        return Tensor(n);
    }

    static void record(Tape* tape, std::function<void()> step) {
        if (tape == nullptr) return;
        if (tape->done_)
            throw Error("recording an op on a tape after backward(); reset() it first", 4);
        tape->steps_.push_back(std::move(step));
    }
};

namespace {

Tape* merge_tapes(std::initializer_list<const Tensor*> inputs) {
    Tape* tape = nullptr;
    for (const Tensor* t : inputs) {
        require(t->defined(), "op on an undefined tensor");
        if (!t->requires_grad()) continue;
        if (tape == nullptr) {
            tape = t->tape();
        } else if (tape != t->tape()) {
            throw Error("op mixes tensors recorded on different tapes", 4);
        }
    }
    return tape;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), std::string(op) + ": shape mismatch");
}

void axpy(std::vector<double>& dst, const std::vector<double>& src) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Tensor constant(Shape shape, std::vector<double> data) {
    return OpAccess::make(std::move(shape), std::move(data), nullptr);
}

Tensor scalar_const(double v) { return constant({1}, {v}); }

Tensor zeros(Shape shape) {
    auto n = shape_numel(shape);
    return constant(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor full(Shape shape, double v) {
    auto n = shape_numel(shape);
    return constant(std::move(shape), std::vector<double>(static_cast<size_t>(n), v));
}

Tensor randn(Shape shape, std::mt19937_64& rng, double stddev) {
    auto n = shape_numel(shape);
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> data(static_cast<size_t>(n));
    for (auto& x : data) x = dist(rng);
    return constant(std::move(shape), std::move(data));
}

Tensor Tape::leaf(Shape shape, std::vector<double> data) {
    return OpAccess::make(std::move(shape), std::move(data), this);
}

void Tape::backward(const Tensor& loss) {
    require(loss.defined() && loss.numel() == 1, "backward() needs a scalar loss");
    if (!loss.requires_grad() || loss.tape() != this)
        throw Error("backward() on a loss not recorded on this tape", 4);
    if (done_) throw Error("backward() called twice without reset()", 4);
    done_ = true;
    OpAccess::node(loss)->grad[0] = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

void Tape::reset() {
    for (auto& n : nodes_) std::fill(n->grad.begin(), n->grad.end(), 0.0);
    done_ = false;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const int64_t m = a.rows(), k = a.cols(), n = b.cols();
    require(b.rows() == k, "matmul: inner dimensions differ");
    Tape* tape = merge_tapes({&a, &b});
    std::vector<double> out(static_cast<size_t>(m * n));
    kernels::gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
    Tensor c = OpAccess::make({m, n}, std::move(out), tape);
    if (tape) {
        auto na = OpAccess::node(a), nb = OpAccess::node(b), nc = OpAccess::node(c);
        OpAccess::record(tape, [na, nb, nc, m, k, n] {
            if (na->requires_grad) {
                std::vector<double> tmp(na->data.size());
                kernels::gemm_nt(nc->grad.data(), nb->data.data(), tmp.data(), m, n, k);
                axpy(na->grad, tmp);
            }
            if (nb->requires_grad)
                kernels::gemm_tn_acc(na->data.data(), nc->grad.data(), nb->grad.data(), k, m, n);
        });
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    const int64_t m = a.rows(), n = a.cols();
    Tape* tape = merge_tapes({&a});
    std::vector<double> out(static_cast<size_t>(m * n));
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out[static_cast<size_t>(j * m + i)] = a.at(i, j);
    Tensor c = OpAccess::make({n, m}, std::move(out), tape);
    if (tape) {
        auto na = OpAccess::node(a), nc = OpAccess::node(c);
        OpAccess::record(tape, [na, nc, m, n] {
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j)
                    na->grad[static_cast<size_t>(i * n + j)] += nc->grad[static_cast<size_t>(j * m + i)];
        });
    }
    return c;
}

namespace {

Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* name, double sign_b) {
    require_same_shape(a, b, name);
    Tape* tape = merge_tapes({&a, &b});
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + sign_b * b.data()[i];
    Tensor c = OpAccess::make(a.shape(), std::move(out), tape);
    if (tape) {
        auto na = OpAccess::node(a), nb = OpAccess::node(b), nc = OpAccess::node(c);
        OpAccess::record(tape, [na, nb, nc, sign_b] {
            if (na->requires_grad) axpy(na->grad, nc->grad);
            if (nb->requires_grad)
                for (size_t i = 0; i < nb->grad.size(); ++i) nb->grad[i] += sign_b * nc->grad[i];
        });
    }
    return c;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise_binary(a, b, "add", 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise_binary(a, b, "sub", -1.0); }

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "hadamard");
    Tape* tape = merge_tapes({&a, &b});
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    Tensor c = OpAccess::make(a.shape(), std::move(out), tape);
    if (tape) {
        auto na = OpAccess::node(a), nb = OpAccess::node(b), nc = OpAccess::node(c);
        OpAccess::record(tape, [na, nb, nc] {
            if (na->requires_grad)
                for (size_t i = 0; i < na->grad.size(); ++i) na->grad[i] += nc->grad[i] * nb->data[i];
            if (nb->requires_grad)
                for (size_t i = 0; i < nb->grad.size(); ++i) nb->grad[i] += nc->grad[i] * na->data[i];
        });
    }
    return c;
}

Tensor scale(const Tensor& a, double c) {
    Tape* tape = merge_tapes({&a});
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = c * a.data()[i];
    Tensor r = OpAccess::make(a.shape(), std::move(out), tape);
    if (tape) {
        auto na = OpAccess::node(a), nr = OpAccess::node(r);
        OpAccess::record(tape, [na, nr, c] {
            for (size_t i = 0; i < na->grad.size(); ++i) na->grad[i] += c * nr->grad[i];
        });
    }
    return r;
}

Tensor sigmoid(const Tensor& a) {
    Tape* tape = merge_tapes({&a});
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) {
        const double x = a.data()[i];
        out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    Tensor r = OpAccess::make(a.shape(), std::move(out), tape);
    if (tape) {
        auto na = OpAccess::node(a), nr = OpAccess::node(r);
        OpAccess::record(tape, [na, nr] {
            for (size_t i = 0; i < na->grad.size(); ++i) {
                const double y = nr->data[i];
                na->grad[i] += nr->grad[i] * y * (1.0 - y);
            }
        });
    }
    return r;
}

Tensor gelu(const Tensor& a) {
    constexpr double kInvSqrt2 = 0.7071067811865475244;
    constexpr double kInvSqrt2Pi = 0.3989422804014326779;
    Tape* tape = merge_tapes({&a});
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) {
        const double x = a.data()[i];
        out[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
    Tensor r = OpAccess::make(a.shape(), std::move(out), tape);
    if (tape) {
        auto na = OpAccess::node(a), nr = OpAccess::node(r);
        OpAccess::record(tape, [na, nr] {
            for (size_t i = 0; i < na->grad.size(); ++i) {
                const double x = na->data[i];
                const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                na->grad[i] += nr->grad[i] * (cdf + x * pdf);
            }
        });
    }
    return r;
}

Tensor softmax_rows(const Tensor& a) {
    const int64_t m = a.rows(), n = a.cols();
    Tape* tape = merge_tapes({&a});
    std::vector<double> out(a.data().size());
    for (int64_t i = 0; i < m; ++i) {
        const double* row = a.data().data() + i * n;
        double* orow = out.data() + i * n;
        double mx = row[0];
        for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            z += orow[j];
        }
        for (int64_t j = 0; j < n; ++j) orow[j] /= z;
    }
    Tensor r = OpAccess::make({m, n}, std::move(out), tape);
    if (tape) {
        auto na = OpAccess::node(a), nr = OpAccess::node(r);
        OpAccess::record(tape, [na, nr, m, n] {
            for (int64_t i = 0; i < m; ++i) {
                const double* y = nr->data.data() + i * n;
                const double* dy = nr->grad.data() + i * n;
                double* dx = na->grad.data() + i * n;
                double inner = 0.0;
                for (int64_t j = 0; j < n; ++j) inner += dy[j] * y[j];
                for (int64_t j = 0; j < n; ++j) dx[j] += y[j] * (dy[j] - inner);
            }
        });
    }
    return r;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    const int64_t m = x.rows(), d = x.cols();
    require(d >= 2, "layer_norm: last dimension must be at least 2");
    require(gain.shape() == Shape{d} && bias.shape() == Shape{d},
            "layer_norm: gain and bias must be vectors of the feature size");
    Tape* tape = merge_tapes({&x, &gain, &bias});
    std::vector<double> out(x.data().size());
    auto xhat = std::make_shared<std::vector<double>>(x.data().size());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(m));
    for (int64_t i = 0; i < m; ++i) {
        const double* row = x.data().data() + i * d;
        double mu = 0.0;
        for (int64_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        (*inv_std)[static_cast<size_t>(i)] = inv;
        for (int64_t j = 0; j < d; ++j) {
            const double h = (row[j] - mu) * inv;
            (*xhat)[static_cast<size_t>(i * d + j)] = h;
            out[static_cast<size_t>(i * d + j)] = h * gain.at(j) + bias.at(j);
        }
    }
    Tensor r = OpAccess::make({m, d}, std::move(out), tape);
    if (tape) {
        auto nx = OpAccess::node(x), ng = OpAccess::node(gain), nb = OpAccess::node(bias);
        auto nr = OpAccess::node(r);
        OpAccess::record(tape, [nx, ng, nb, nr, xhat, inv_std, m, d] {
            for (int64_t i = 0; i < m; ++i) {
                const double* dy = nr->grad.data() + i * d;
                const double* h = xhat->data() + i * d;
                if (ng->requires_grad)
                    for (int64_t j = 0; j < d; ++j) ng->grad[static_cast<size_t>(j)] += dy[j] * h[j];
                if (nb->requires_grad)
                    for (int64_t j = 0; j < d; ++j) nb->grad[static_cast<size_t>(j)] += dy[j];
                if (!nx->requires_grad) continue;
                double mean_dh = 0.0, mean_dh_h = 0.0;
                for (int64_t j = 0; j < d; ++j) {
                    const double dh = dy[j] * ng->data[static_cast<size_t>(j)];
                    mean_dh += dh;
                    mean_dh_h += dh * h[j];
                }
                mean_dh /= static_cast<double>(d);
                mean_dh_h /= static_cast<double>(d);
                const double inv = (*inv_std)[static_cast<size_t>(i)];
                double* dx = nx->grad.data() + i * d;
                for (int64_t j = 0; j < d; ++j) {
                    const double dh = dy[j] * ng->data[static_cast<size_t>(j)];
                    dx[j] += inv * (dh - mean_dh - h[j] * mean_dh_h);
                }
            }
        });
    }
    return r;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    const int64_t n = parts[0].cols();
    int64_t total = 0;
    std::vector<const Tensor*> ptrs;
    for (const auto& p : parts) {
        require(p.cols() == n, "concat_rows: column counts differ");
        total += p.rows();
        ptrs.push_back(&p);
    }
    Tape* tape = nullptr;
    for (const auto& p : parts) {
        Tape* t = merge_tapes({&p});
        if (t != nullptr) {
            require(tape == nullptr || tape == t, "concat_rows: inputs from different tapes");
            tape = t;
        }
    }
    std::vector<double> out;
    out.reserve(static_cast<size_t>(total * n));
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    Tensor r = OpAccess::make({total, n}, std::move(out), tape);
    if (tape) {
        std::vector<std::shared_ptr<TensorNode>> srcs;
        for (const auto& p : parts) srcs.push_back(OpAccess::node(p));
        auto nr = OpAccess::node(r);
        OpAccess::record(tape, [srcs, nr] {
            size_t off = 0;
            for (auto& s : srcs) {
                if (s->requires_grad)
                    for (size_t i = 0; i < s->grad.size(); ++i) s->grad[i] += nr->grad[off + i];
                off += s->data.size();
            }
        });
    }
    return r;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    const int64_t m = parts[0].rows();
    int64_t total = 0;
    for (const auto& p : parts) {
        require(p.rows() == m, "concat_cols: row counts differ");
        total += p.cols();
    }
    Tape* tape = nullptr;
    for (const auto& p : parts) {
        Tape* t = merge_tapes({&p});
        if (t != nullptr) {
            require(tape == nullptr || tape == t, "concat_cols: inputs from different tapes");
            tape = t;
        }
    }
    std::vector<double> out(static_cast<size_t>(m * total));
    int64_t col_off = 0;
    for (const auto& p : parts) {
        const int64_t w = p.cols();
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < w; ++j)
                out[static_cast<size_t>(i * total + col_off + j)] = p.at(i, j);
        col_off += w;
    }
    Tensor r = OpAccess::make({m, total}, std::move(out), tape);
    if (tape) {
        std::vector<std::shared_ptr<TensorNode>> srcs;
        std::vector<int64_t> widths;
        for (const auto& p : parts) {
            srcs.push_back(OpAccess::node(p));
            widths.push_back(p.cols());
        }
        auto nr = OpAccess::node(r);
        OpAccess::record(tape, [srcs, widths, nr, m, total] {
            int64_t off = 0;
            for (size_t s = 0; s < srcs.size(); ++s) {
                const int64_t w = widths[s];
                if (srcs[s]->requires_grad)
                    for (int64_t i = 0; i < m; ++i)
                        for (int64_t j = 0; j < w; ++j)
                            srcs[s]->grad[static_cast<size_t>(i * w + j)] +=
                                nr->grad[static_cast<size_t>(i * total + off + j)];
                off += w;
            }
        });
    }
    return r;
}

Tensor slice_cols(const Tensor& a, int64_t start, int64_t width) {
    const int64_t m = a.rows(), n = a.cols();
    require(start >= 0 && width > 0 && start + width <= n, "slice_cols: range out of bounds");
    Tape* tape = merge_tapes({&a});
    std::vector<double> out(static_cast<size_t>(m * width));
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < width; ++j)
            out[static_cast<size_t>(i * width + j)] = a.at(i, start + j);
    Tensor r = OpAccess::make({m, width}, std::move(out), tape);
    if (tape) {
        auto na = OpAccess::node(a), nr = OpAccess::node(r);
        OpAccess::record(tape, [na, nr, m, n, start, width] {
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < width; ++j)
                    na->grad[static_cast<size_t>(i * n + start + j)] +=
                        nr->grad[static_cast<size_t>(i * width + j)];
        });
    }
    return r;
}

Tensor sum_rows(const Tensor& a) {
    const int64_t m = a.rows(), n = a.cols();
    Tape* tape = merge_tapes({&a});
    std::vector<double> out(static_cast<size_t>(n), 0.0);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out[static_cast<size_t>(j)] += a.at(i, j);
    Tensor r = OpAccess::make({n}, std::move(out), tape);
    if (tape) {
        auto na = OpAccess::node(a), nr = OpAccess::node(r);
        OpAccess::record(tape, [na, nr, m, n] {
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j)
                    na->grad[static_cast<size_t>(i * n + j)] += nr->grad[static_cast<size_t>(j)];
        });
    }
    return r;
}

Tensor sum_all(const Tensor& a) {
    Tape* tape = merge_tapes({&a});
    double s = 0.0;
    for (double x : a.data()) s += x;
    Tensor r = OpAccess::make({1}, {s}, tape);
    if (tape) {
        auto na = OpAccess::node(a), nr = OpAccess::node(r);
        OpAccess::record(tape, [na, nr] {
            for (auto& g : na->grad) g += nr->grad[0];
        });
    }
    return r;
}

Tensor mean_all(const Tensor& a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor dot(const Tensor& a, const Tensor& b) {
    require(a.shape().size() == 1 && a.shape() == b.shape(), "dot: needs two equal-length vectors");
    Tape* tape = merge_tapes({&a, &b});
    const double s = kernels::dot(a.data().data(), b.data().data(),
                                  static_cast<int64_t>(a.data().size()));
    Tensor r = OpAccess::make({1}, {s}, tape);
    if (tape) {
        auto na = OpAccess::node(a), nb = OpAccess::node(b), nr = OpAccess::node(r);
        OpAccess::record(tape, [na, nb, nr] {
            const double g = nr->grad[0];
            if (na->requires_grad)
                for (size_t i = 0; i < na->grad.size(); ++i) na->grad[i] += g * nb->data[i];
            if (nb->requires_grad)
                for (size_t i = 0; i < nb->grad.size(); ++i) nb->grad[i] += g * na->data[i];
        });
    }
    return r;
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    const int64_t m = x.rows(), n = x.cols();
    require(v.shape() == Shape{n}, "add_rowvec: vector length must match columns");
    Tape* tape = merge_tapes({&x, &v});
    std::vector<double> out(x.data().size());
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j)
            out[static_cast<size_t>(i * n + j)] = x.at(i, j) + v.at(j);
    Tensor r = OpAccess::make({m, n}, std::move(out), tape);
    if (tape) {
        auto nx = OpAccess::node(x), nv = OpAccess::node(v), nr = OpAccess::node(r);
        OpAccess::record(tape, [nx, nv, nr, m, n] {
            if (nx->requires_grad) axpy(nx->grad, nr->grad);
            if (nv->requires_grad)
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j)
                        nv->grad[static_cast<size_t>(j)] += nr->grad[static_cast<size_t>(i * n + j)];
        });
    }
    return r;
}

Tensor logsumexp_rows(const Tensor& a) {
    const int64_t m = a.rows(), n = a.cols();
    Tape* tape = merge_tapes({&a});
    std::vector<double> out(static_cast<size_t>(m));
    for (int64_t i = 0; i < m; ++i) {
        const double* row = a.data().data() + i * n;
        double mx = row[0];
        for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int64_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
        out[static_cast<size_t>(i)] = mx + std::log(z);
    }
    Tensor r = OpAccess::make({m}, std::move(out), tape);
    if (tape) {
        auto na = OpAccess::node(a), nr = OpAccess::node(r);
        OpAccess::record(tape, [na, nr, m, n] {
            for (int64_t i = 0; i < m; ++i) {
                const double lse = nr->data[static_cast<size_t>(i)];
                const double g = nr->grad[static_cast<size_t>(i)];
                for (int64_t j = 0; j < n; ++j)
                    na->grad[static_cast<size_t>(i * n + j)] +=
                        g * std::exp(na->data[static_cast<size_t>(i * n + j)] - lse);
            }
        });
    }
    return r;
}

Tensor take_diag(const Tensor& a) {
    const int64_t n = a.rows();
    require(a.cols() == n, "take_diag: needs a square matrix");
    Tape* tape = merge_tapes({&a});
    std::vector<double> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = a.at(i, i);
    Tensor r = OpAccess::make({n}, std::move(out), tape);
    if (tape) {
        auto na = OpAccess::node(a), nr = OpAccess::node(r);
        OpAccess::record(tape, [na, nr, n] {
            for (int64_t i = 0; i < n; ++i)
                na->grad[static_cast<size_t>(i * n + i)] += nr->grad[static_cast<size_t>(i)];
        });
    }
    return r;
}

Tensor div_by_scalar(const Tensor& x, const Tensor& t) {
    require(t.numel() == 1, "div_by_scalar: divisor must be a scalar tensor");
    const double tv = t.at(0);
    if (tv == 0.0) throw NumericError("div_by_scalar: division by zero");
    Tape* tape = merge_tapes({&x, &t});
    std::vector<double> out(x.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] / tv;
    Tensor r = OpAccess::make(x.shape(), std::move(out), tape);
    if (tape) {
        auto nx = OpAccess::node(x), nt = OpAccess::node(t), nr = OpAccess::node(r);
        OpAccess::record(tape, [nx, nt, nr, tv] {
            if (nx->requires_grad)
                for (size_t i = 0; i < nx->grad.size(); ++i) nx->grad[i] += nr->grad[i] / tv;
            if (nt->requires_grad) {
                double s = 0.0;
                for (size_t i = 0; i < nr->grad.size(); ++i) s += nr->grad[i] * nr->data[i];
                nt->grad[0] += -s / tv;
            }
        });
    }
    return r;
}

Tensor sum_rowmax(const Tensor& a) {
    const int64_t m = a.rows(), n = a.cols();
    Tape* tape = merge_tapes({&a});
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(m));
    double s = 0.0;
    for (int64_t i = 0; i < m; ++i) {
        const double* row = a.data().data() + i * n;
        int64_t best = 0;
        for (int64_t j = 1; j < n; ++j)
            if (row[j] > row[best]) best = j;  // ties keep the smallest index
        (*argmax)[static_cast<size_t>(i)] = best;
        s += row[best];
    }
    Tensor r = OpAccess::make({1}, {s}, tape);
    if (tape) {
        auto na = OpAccess::node(a), nr = OpAccess::node(r);
        OpAccess::record(tape, [na, nr, argmax, n] {
            for (size_t i = 0; i < argmax->size(); ++i)
                na->grad[i * static_cast<size_t>(n) + static_cast<size_t>((*argmax)[i])] +=
                    nr->grad[0];
        });
    }
    return r;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    require(!rows.empty(), "stack_rows: no inputs");
    const Shape& s0 = rows[0].shape();
    require(s0.size() == 1, "stack_rows: inputs must be vectors");
    const int64_t n = s0[0];
    Tape* tape = nullptr;
    for (const auto& v : rows) {
        require(v.shape() == s0, "stack_rows: vector lengths differ");
        Tape* t = merge_tapes({&v});
        if (t != nullptr) {
            require(tape == nullptr || tape == t, "stack_rows: inputs from different tapes");
            tape = t;
        }
    }
    const int64_t m = static_cast<int64_t>(rows.size());
    std::vector<double> out;
    out.reserve(static_cast<size_t>(m * n));
    for (const auto& v : rows) out.insert(out.end(), v.data().begin(), v.data().end());
    Tensor r = OpAccess::make({m, n}, std::move(out), tape);
    if (tape) {
        std::vector<std::shared_ptr<TensorNode>> srcs;
        for (const auto& v : rows) srcs.push_back(OpAccess::node(v));
        auto nr = OpAccess::node(r);
        OpAccess::record(tape, [srcs, nr, n] {
            for (size_t i = 0; i < srcs.size(); ++i)
                if (srcs[i]->requires_grad)
                    for (int64_t j = 0; j < n; ++j)
                        srcs[i]->grad[static_cast<size_t>(j)] +=
                            nr->grad[i * static_cast<size_t>(n) + static_cast<size_t>(j)];
        });
    }
    return r;
}

Tensor stack_scalars(const std::vector<Tensor>& cells, int64_t rows, int64_t cols) {
    require(static_cast<int64_t>(cells.size()) == rows * cols,
            "stack_scalars: cell count does not match the target shape");
    Tape* tape = nullptr;
    std::vector<double> out(cells.size());
    for (size_t i = 0; i < cells.size(); ++i) {
        require(cells[i].defined() && cells[i].numel() == 1, "stack_scalars: inputs must be scalars");
        out[i] = cells[i].at(0);
        Tape* t = merge_tapes({&cells[i]});
        if (t != nullptr) {
            require(tape == nullptr || tape == t, "stack_scalars: inputs from different tapes");
            tape = t;
        }
    }
    Tensor r = OpAccess::make({rows, cols}, std::move(out), tape);
    if (tape) {
        std::vector<std::shared_ptr<TensorNode>> srcs;
        for (const auto& c : cells) srcs.push_back(OpAccess::node(c));
        auto nr = OpAccess::node(r);
        OpAccess::record(tape, [srcs, nr] {
            for (size_t i = 0; i < srcs.size(); ++i)
                if (srcs[i]->requires_grad) srcs[i]->grad[0] += nr->grad[i];
        });
    }
    return r;
}

}  // namespace ret2
