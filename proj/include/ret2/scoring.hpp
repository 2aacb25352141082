// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0
//
// Relevance scoring and the contrastive loss. Two scoring modes exist: the
// single-token dot product (score fusion collapses multi-token outputs by
// row summation first) and fine-grained late interaction, where each query
// token keeps only its best-matching document token. Plain-double variants
// serve the retrieval index; Tensor variants carry gradients for training.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ret2/tensor.hpp"

namespace ret2 {

// sum_i max_j q_i . d_j over row-major token matrices.
double maxsim_score(const std::vector<double>& q, int64_t kq, const std::vector<double>& d,
                    int64_t kd, int64_t dim);

// dot(sum of q rows, sum of d rows) == the full double sum of pairwise dots.
double fusion_score(const std::vector<double>& q, int64_t kq, const std::vector<double>& d,
                    int64_t kd, int64_t dim);

Tensor maxsim_pair(const Tensor& q, const Tensor& d);        // scalar
Tensor score_fusion_pair(const Tensor& q, const Tensor& d);  // scalar

// B x B similarity matrices over per-record embeddings (row i: query i
// against every document j).
Tensor similarity_matrix_fusion(const std::vector<Tensor>& queries,
                                const std::vector<Tensor>& documents);
Tensor similarity_matrix_maxsim(const std::vector<Tensor>& queries,
                                const std::vector<Tensor>& documents);

// Symmetric in-batch InfoNCE with positives on the diagonal: the mean of
// row-wise and column-wise cross-entropies, averaged. When a temperature is
// given, logits are sim/temperature; pass nullopt to use raw similarities.
Tensor infonce(const Tensor& sim, const std::optional<Tensor>& temperature = std::nullopt);

inline constexpr double kTemperatureInit = 0.07;
inline constexpr double kTemperatureMin = 1e-3;
inline constexpr double kTemperatureMax = 1.0;

}  // namespace ret2
