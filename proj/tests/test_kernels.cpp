// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "ret2/kernels.hpp"

using namespace ret2;

namespace {

std::vector<double> rand_vec(size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

}  // namespace

TEST_CASE("gemm_nn matches the naive triple loop") {
    std::mt19937_64 rng(11);
    for (auto [m, k, n] : {std::tuple{1, 1, 1}, {3, 4, 5}, {17, 9, 23}, {64, 32, 48}}) {
        auto a = rand_vec(static_cast<size_t>(m * k), rng);
        auto b = rand_vec(static_cast<size_t>(k * n), rng);
        std::vector<double> c(static_cast<size_t>(m * n));
        kernels::gemm_nn(a.data(), b.data(), c.data(), m, k, n);
        auto ref = oracles::naive_matmul(a, b, m, k, n);
        for (size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("gemm_nt and gemm_tn_acc match explicit transposes") {
    std::mt19937_64 rng(12);
    const int64_t m = 13, k = 7, n = 19;
    auto a = rand_vec(static_cast<size_t>(m * k), rng);
    auto b = rand_vec(static_cast<size_t>(n * k), rng);

    std::vector<double> bt(static_cast<size_t>(k * n));
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < k; ++j)
            bt[static_cast<size_t>(j * n + i)] = b[static_cast<size_t>(i * k + j)];
    auto ref_nt = oracles::naive_matmul(a, bt, m, k, n);
    std::vector<double> c(static_cast<size_t>(m * n));
    kernels::gemm_nt(a.data(), b.data(), c.data(), m, k, n);
    for (size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref_nt[i]).epsilon(1e-12));

    auto x = rand_vec(static_cast<size_t>(k * m), rng);
    auto y = rand_vec(static_cast<size_t>(k * n), rng);
    std::vector<double> xt(static_cast<size_t>(m * k));
    for (int64_t i = 0; i < k; ++i)
        for (int64_t j = 0; j < m; ++j)
            xt[static_cast<size_t>(j * k + i)] = x[static_cast<size_t>(i * m + j)];
    auto ref_tn = oracles::naive_matmul(xt, y, m, k, n);
    std::vector<double> acc(static_cast<size_t>(m * n), 0.5);
    kernels::gemm_tn_acc(x.data(), y.data(), acc.data(), m, k, n);
    for (size_t i = 0; i < acc.size(); ++i)
        CHECK(acc[i] == doctest::Approx(0.5 + ref_tn[i]).epsilon(1e-12));
}

TEST_CASE("parallel and serial kernels agree bitwise") {
    std::mt19937_64 rng(13);
    SUBCASE("gemm_nn") {
        for (auto [m, k, n] : {std::tuple{2, 3, 4}, {33, 65, 41}, {128, 64, 96}}) {
            auto a = rand_vec(static_cast<size_t>(m * k), rng);
            auto b = rand_vec(static_cast<size_t>(k * n), rng);
            std::vector<double> cs(static_cast<size_t>(m * n)), cp(cs.size());
            kernels::gemm_nn_serial(a.data(), b.data(), cs.data(), m, k, n);
            kernels::gemm_nn_omp(a.data(), b.data(), cp.data(), m, k, n);
            CHECK(cs == cp);
        }
    }
    SUBCASE("gemm_nt") {
        const int64_t m = 47, k = 31, n = 53;
        auto a = rand_vec(static_cast<size_t>(m * k), rng);
        auto b = rand_vec(static_cast<size_t>(n * k), rng);
        std::vector<double> cs(static_cast<size_t>(m * n)), cp(cs.size());
        kernels::gemm_nt_serial(a.data(), b.data(), cs.data(), m, k, n);
        kernels::gemm_nt_omp(a.data(), b.data(), cp.data(), m, k, n);
        CHECK(cs == cp);
    }
    SUBCASE("gemm_tn_acc") {
        const int64_t m = 29, k = 37, n = 43;
        auto x = rand_vec(static_cast<size_t>(k * m), rng);
        auto y = rand_vec(static_cast<size_t>(k * n), rng);
        auto seed = rand_vec(static_cast<size_t>(m * n), rng);
        auto cs = seed, cp = seed;
        kernels::gemm_tn_acc_serial(x.data(), y.data(), cs.data(), m, k, n);
        kernels::gemm_tn_acc_omp(x.data(), y.data(), cp.data(), m, k, n);
        CHECK(cs == cp);
    }
    SUBCASE("maxsim_scores") {
        const int64_t kq = 8, kd = 16, dim = 24, docs = 37;
        auto q = rand_vec(static_cast<size_t>(kq * dim), rng);
        auto corpus = rand_vec(static_cast<size_t>(docs * kd * dim), rng);
        std::vector<double> ss(static_cast<size_t>(docs)), sp(ss.size());
        kernels::maxsim_scores_serial(corpus.data(), docs, q.data(), kq, kd, dim, ss.data());
        kernels::maxsim_scores_omp(corpus.data(), docs, q.data(), kq, kd, dim, sp.data());
        CHECK(ss == sp);
        for (int64_t i = 0; i < docs; ++i) {
            std::vector<double> one(corpus.begin() + i * kd * dim,
                                    corpus.begin() + (i + 1) * kd * dim);
            CHECK(ss[static_cast<size_t>(i)] ==
                  doctest::Approx(oracles::naive_maxsim(q, kq, one, kd, dim)).epsilon(1e-12));
        }
    }
}

TEST_CASE("maxsim reduces to a plain dot product for single-token sides") {
    std::mt19937_64 rng(14);
    const int64_t dim = 33;
    auto q = rand_vec(static_cast<size_t>(dim), rng);
    auto d = rand_vec(static_cast<size_t>(dim), rng);
    CHECK(kernels::maxsim(q.data(), 1, d.data(), 1, dim) == kernels::dot(q.data(), d.data(), dim));
}

TEST_CASE("dot_scores agrees with per-document dot products") {
    std::mt19937_64 rng(15);
    const int64_t dim = 21, docs = 9;
    auto q = rand_vec(static_cast<size_t>(dim), rng);
    auto corpus = rand_vec(static_cast<size_t>(docs * dim), rng);
    std::vector<double> scores(static_cast<size_t>(docs));
    kernels::dot_scores(corpus.data(), docs, q.data(), dim, scores.data());
    for (int64_t i = 0; i < docs; ++i)
        CHECK(scores[static_cast<size_t>(i)] ==
              kernels::dot(corpus.data() + i * dim, q.data(), dim));
}
