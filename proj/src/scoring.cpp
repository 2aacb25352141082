// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0

#include "ret2/scoring.hpp"

#include "ret2/common.hpp"
#include "ret2/kernels.hpp"

namespace ret2 {

double maxsim_score(const std::vector<double>& q, int64_t kq, const std::vector<double>& d,
                    int64_t kd, int64_t dim) {
    require(static_cast<int64_t>(q.size()) == kq * dim &&
                static_cast<int64_t>(d.size()) == kd * dim,
            "maxsim_score: token matrix sizes do not match dims");
    return kernels::maxsim(q.data(), kq, d.data(), kd, dim);
}

double fusion_score(const std::vector<double>& q, int64_t kq, const std::vector<double>& d,
                    int64_t kd, int64_t dim) {
    require(static_cast<int64_t>(q.size()) == kq * dim &&
                static_cast<int64_t>(d.size()) == kd * dim,
            "fusion_score: token matrix sizes do not match dims");
    std::vector<double> qs(static_cast<size_t>(dim), 0.0), ds(static_cast<size_t>(dim), 0.0);
    for (int64_t i = 0; i < kq; ++i)
        for (int64_t j = 0; j < dim; ++j) qs[static_cast<size_t>(j)] += q[static_cast<size_t>(i * dim + j)];
    for (int64_t i = 0; i < kd; ++i)
        for (int64_t j = 0; j < dim; ++j) ds[static_cast<size_t>(j)] += d[static_cast<size_t>(i * dim + j)];
    return kernels::dot(qs.data(), ds.data(), dim);
}

Tensor maxsim_pair(const Tensor& q, const Tensor& d) {
    require(q.cols() == d.cols(), "maxsim_pair: embedding widths differ");
    return sum_rowmax(matmul(q, transpose(d)));
}

Tensor score_fusion_pair(const Tensor& q, const Tensor& d) {
    require(q.cols() == d.cols(), "score_fusion_pair: embedding widths differ");
    return dot(sum_rows(q), sum_rows(d));
}

Tensor similarity_matrix_fusion(const std::vector<Tensor>& queries,
                                const std::vector<Tensor>& documents) {
    require(!queries.empty() && queries.size() == documents.size(),
            "similarity matrix needs equally many queries and documents");
    std::vector<Tensor> q_rows, d_rows;
    q_rows.reserve(queries.size());
    d_rows.reserve(documents.size());
    for (const auto& q : queries) q_rows.push_back(sum_rows(q));
    for (const auto& d : documents) d_rows.push_back(sum_rows(d));
    return matmul(stack_rows(q_rows), transpose(stack_rows(d_rows)));
}

Tensor similarity_matrix_maxsim(const std::vector<Tensor>& queries,
                                const std::vector<Tensor>& documents) {
    require(!queries.empty() && queries.size() == documents.size(),
            "similarity matrix needs equally many queries and documents");
    const int64_t b = static_cast<int64_t>(queries.size());
    std::vector<Tensor> cells;
    cells.reserve(static_cast<size_t>(b * b));
    for (int64_t i = 0; i < b; ++i)
        for (int64_t j = 0; j < b; ++j)
            cells.push_back(maxsim_pair(queries[static_cast<size_t>(i)],
                                        documents[static_cast<size_t>(j)]));
    return stack_scalars(cells, b, b);
}

Tensor infonce(const Tensor& sim, const std::optional<Tensor>& temperature) {
    require(sim.shape().size() == 2 && sim.rows() == sim.cols(),
            "infonce: similarity matrix must be square");
    const int64_t b = sim.rows();
    if (!sim.is_finite()) throw NumericError("infonce: non-finite similarities");
    Tensor logits = sim;
    if (temperature) {
        if (temperature->value() <= 0.0) throw NumericError("infonce: temperature must be positive");
        logits = div_by_scalar(sim, *temperature);
    }
    Tensor diag_sum = sum_all(take_diag(logits));
    Tensor row_ce = sub(sum_all(logsumexp_rows(logits)), diag_sum);
    Tensor col_ce = sub(sum_all(logsumexp_rows(transpose(logits))), diag_sum);
    return scale(add(row_ce, col_ce), 0.5 / static_cast<double>(b));
}

}  // namespace ret2
