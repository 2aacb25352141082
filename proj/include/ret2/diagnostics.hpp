// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0
//
// Analysis tooling: a rank-collapse score measuring how close a multi-token
// embedding matrix is to rank one, and per-step gate activation profiles
// averaged over a corpus sample. Both emit CSV for external plotting.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ret2/fusion_cell.hpp"

namespace ret2 {

// ||M - M1||_F / ||M||_F for the best rank-1 approximation M1 of the k x d
// row-major matrix M. 0 means the rows are exactly rank one (collapsed);
// sqrt((k-1)/k) is the attainable maximum (orthogonal equal-norm rows).
// Throws ConfigError for k < 2 and DataError for an all-zero matrix.
double rank_collapse_score(const std::vector<double>& m, int64_t k, int64_t d);

struct GateProfile {
    struct StepMeans {
        double forget = 0.0;
        double input_text = 0.0;
        double input_visual = 0.0;
        int64_t n_forget = 0;       // contributing samples per gate
        int64_t n_input_text = 0;
        int64_t n_input_visual = 0;
    };
    std::vector<StepMeans> steps;  // one per recurrent step, in order
};

// Mean gate activations per recurrent step across the sample. A gate absent
// from every sample (e.g. the visual input gate when no record has a visual
// side) keeps a zero count; its mean is meaningless and flagged by n == 0.
// Throws DataError on an empty sample.
GateProfile profile_gates(const std::vector<CorpusRecord>& sample, const ParamStore& params,
                          const CellConfig& config);

// "step,gate,mean,n" rows, steps numbered from 1; gates with n == 0 emit an
// empty mean field.
std::string gate_profile_csv(const GateProfile& profile);

// "matrix_id,score" rows.
std::string collapse_csv(const std::vector<std::pair<std::string, double>>& scores);

}  // namespace ret2
