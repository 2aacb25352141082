// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0

#include "ret2/kernels.hpp"

#include <algorithm>
#include <limits>

#include "ret2/common.hpp"

namespace ret2::kernels {
namespace {

// Work below this many multiply-adds is not worth a parallel region.
constexpr int64_t kParallelCutoff = 1 << 15;

// One output row of C = A*B, accumulated over l in ascending order. Shared by
// the serial and OpenMP variants so they match bitwise.
inline void gemm_nn_row(const double* a_row, const double* b, double* c_row, int64_t k, int64_t n) {
    std::fill(c_row, c_row + n, 0.0);
    for (int64_t l = 0; l < k; ++l) {
        const double av = a_row[l];
        const double* b_row = b + l * n;
        for (int64_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
    }
}

inline void gemm_nt_row(const double* a_row, const double* b, double* c_row, int64_t k, int64_t n) {
    for (int64_t j = 0; j < n; ++j) c_row[j] = dot(a_row, b + j * k, k);
}

inline void gemm_tn_acc_col(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n, int64_t i) {
    // c row i accumulates a(:, i)^T * b.
    for (int64_t l = 0; l < k; ++l) {
        const double av = a[l * m + i];
        const double* b_row = b + l * n;
        double* c_row = c + i * n;
        for (int64_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
    }
}

}  // namespace

void gemm_nn_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) gemm_nn_row(a + i * k, b, c + i * n, k, n);
}

void gemm_nn_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (int64_t i = 0; i < m; ++i) gemm_nn_row(a + i * k, b, c + i * n, k, n);
}

void gemm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    if (m > 1 && m * k * n >= kParallelCutoff && worker_threads() > 1) {
        gemm_nn_omp(a, b, c, m, k, n);
    } else {
        gemm_nn_serial(a, b, c, m, k, n);
    }
}

void gemm_nt_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) gemm_nt_row(a + i * k, b, c + i * n, k, n);
}

void gemm_nt_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (int64_t i = 0; i < m; ++i) gemm_nt_row(a + i * k, b, c + i * n, k, n);
}

void gemm_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    if (m > 1 && m * k * n >= kParallelCutoff && worker_threads() > 1) {
        gemm_nt_omp(a, b, c, m, k, n);
    } else {
        gemm_nt_serial(a, b, c, m, k, n);
    }
}

void gemm_tn_acc_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) gemm_tn_acc_col(a, b, c, m, k, n, i);
}

void gemm_tn_acc_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (int64_t i = 0; i < m; ++i) gemm_tn_acc_col(a, b, c, m, k, n, i);
}

void gemm_tn_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    if (m > 1 && m * k * n >= kParallelCutoff && worker_threads() > 1) {
        gemm_tn_acc_omp(a, b, c, m, k, n);
    } else {
        gemm_tn_acc_serial(a, b, c, m, k, n);
    }
}

double dot(const double* a, const double* b, int64_t n) {
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double maxsim(const double* q, int64_t kq, const double* doc, int64_t kd, int64_t d) {
    double total = 0.0;
    for (int64_t i = 0; i < kq; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < kd; ++j) {
            best = std::max(best, dot(q + i * d, doc + j * d, d));
        }
        total += best;
    }
    return total;
}

void dot_scores_serial(const double* docs, int64_t n_docs, const double* query, int64_t d, double* scores) {
    for (int64_t i = 0; i < n_docs; ++i) scores[i] = dot(docs + i * d, query, d);
}

void dot_scores_omp(const double* docs, int64_t n_docs, const double* query, int64_t d, double* scores) {
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (int64_t i = 0; i < n_docs; ++i) scores[i] = dot(docs + i * d, query, d);
}

void dot_scores(const double* docs, int64_t n_docs, const double* query, int64_t d, double* scores) {
    if (n_docs * d >= kParallelCutoff && worker_threads() > 1) {
        dot_scores_omp(docs, n_docs, query, d, scores);
    } else {
        dot_scores_serial(docs, n_docs, query, d, scores);
    }
}

void maxsim_scores_serial(const double* docs, int64_t n_docs, const double* query, int64_t kq, int64_t kd, int64_t d, double* scores) {
    for (int64_t i = 0; i < n_docs; ++i) scores[i] = maxsim(query, kq, docs + i * kd * d, kd, d);
}

void maxsim_scores_omp(const double* docs, int64_t n_docs, const double* query, int64_t kq, int64_t kd, int64_t d, double* scores) {
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (int64_t i = 0; i < n_docs; ++i) scores[i] = maxsim(query, kq, docs + i * kd * d, kd, d);
}

void maxsim_scores(const double* docs, int64_t n_docs, const double* query, int64_t kq, int64_t kd, int64_t d, double* scores) {
    if (n_docs * kq * kd * d >= kParallelCutoff && worker_threads() > 1) {
        maxsim_scores_omp(docs, n_docs, query, kq, kd, d, scores);
    } else {
        maxsim_scores_serial(docs, n_docs, query, kq, kd, d, scores);
    }
}

}  // namespace ret2::kernels
