// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0
//
// Dense numeric kernels. Every kernel comes in two variants: a plain serial
// reference and an OpenMP version parallelized over independent output
// elements. Both share the same per-element accumulation order, so results
// are bitwise identical regardless of thread count; the test suite asserts
// this and bench/ compares their throughput. The un-suffixed entry points
// dispatch to OpenMP when it is worth it.

#pragma once

#include <cstdint>

namespace ret2::kernels {

// c[m x n] = a[m x k] * b[k x n], row-major. c is overwritten.
void gemm_nn_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void gemm_nn_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void gemm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

// c[m x n] = a[m x k] * b[n x k]^T (b stored row-major n x k).
void gemm_nt_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void gemm_nt_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void gemm_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

// c[m x n] += a[k x m]^T * b[k x n] (a stored row-major k x m). Accumulates.
void gemm_tn_acc_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void gemm_tn_acc_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void gemm_tn_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

// Plain dot product of two length-n vectors, accumulated left to right.
double dot(const double* a, const double* b, int64_t n);

// Late-interaction score of two token matrices q[kq x d], doc[kd x d]:
// sum over query rows of the max dot product against any doc row.
double maxsim(const double* q, int64_t kq, const double* doc, int64_t kd, int64_t d);

// scores[i] = dot(docs + i*d, query) for n_docs row-major docs.
void dot_scores_serial(const double* docs, int64_t n_docs, const double* query, int64_t d, double* scores);
void dot_scores_omp(const double* docs, int64_t n_docs, const double* query, int64_t d, double* scores);
void dot_scores(const double* docs, int64_t n_docs, const double* query, int64_t d, double* scores);

// scores[i] = maxsim(query[kq x d], docs + i*kd*d) for n_docs token matrices.
void maxsim_scores_serial(const double* docs, int64_t n_docs, const double* query, int64_t kq, int64_t kd, int64_t d, double* scores);
void maxsim_scores_omp(const double* docs, int64_t n_docs, const double* query, int64_t kq, int64_t kd, int64_t d, double* scores);
void maxsim_scores(const double* docs, int64_t n_docs, const double* query, int64_t kq, int64_t kd, int64_t d, double* scores);

}  // namespace ret2::kernels
