// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0
//
// Serial vs OpenMP kernel throughput. The two variants are bitwise equal by
// construction; this target measures what the parallel versions buy at the
// sizes the encoder and the retrieval scan actually use.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "ret2/common.hpp"
#include "ret2/kernels.hpp"

namespace {

using namespace ret2;

std::vector<double> filled(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.gaussian();
    return v;
}

void bm_gemm_nn_serial(benchmark::State& state) {
    const int64_t n = state.range(0);
    auto a = filled(static_cast<size_t>(n * n), 1);
    auto b = filled(static_cast<size_t>(n * n), 2);
    std::vector<double> c(static_cast<size_t>(n * n));
    for (auto _ : state) {
        kernels::gemm_nn_serial(a.data(), b.data(), c.data(), n, n, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

void bm_gemm_nn_omp(benchmark::State& state) {
    const int64_t n = state.range(0);
    auto a = filled(static_cast<size_t>(n * n), 1);
    auto b = filled(static_cast<size_t>(n * n), 2);
    std::vector<double> c(static_cast<size_t>(n * n));
    for (auto _ : state) {
        kernels::gemm_nn_omp(a.data(), b.data(), c.data(), n, n, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

void bm_dot_scores_serial(benchmark::State& state) {
    const int64_t n_docs = state.range(0), d = 128;
    auto docs = filled(static_cast<size_t>(n_docs * d), 3);
    auto query = filled(static_cast<size_t>(d), 4);
    std::vector<double> scores(static_cast<size_t>(n_docs));
    for (auto _ : state) {
        kernels::dot_scores_serial(docs.data(), n_docs, query.data(), d, scores.data());
        benchmark::DoNotOptimize(scores.data());
    }
    state.SetItemsProcessed(state.iterations() * n_docs);
}

void bm_dot_scores_omp(benchmark::State& state) {
    const int64_t n_docs = state.range(0), d = 128;
    auto docs = filled(static_cast<size_t>(n_docs * d), 3);
    auto query = filled(static_cast<size_t>(d), 4);
    std::vector<double> scores(static_cast<size_t>(n_docs));
    for (auto _ : state) {
        kernels::dot_scores_omp(docs.data(), n_docs, query.data(), d, scores.data());
        benchmark::DoNotOptimize(scores.data());
    }
    state.SetItemsProcessed(state.iterations() * n_docs);
}

void bm_maxsim_scores_serial(benchmark::State& state) {
    const int64_t n_docs = state.range(0), kq = 32, kd = 32, d = 128;
    auto docs = filled(static_cast<size_t>(n_docs * kd * d), 5);
    auto query = filled(static_cast<size_t>(kq * d), 6);
    std::vector<double> scores(static_cast<size_t>(n_docs));
    for (auto _ : state) {
        kernels::maxsim_scores_serial(docs.data(), n_docs, query.data(), kq, kd, d, scores.data());
        benchmark::DoNotOptimize(scores.data());
    }
    state.SetItemsProcessed(state.iterations() * n_docs);
}

void bm_maxsim_scores_omp(benchmark::State& state) {
    const int64_t n_docs = state.range(0), kq = 32, kd = 32, d = 128;
    auto docs = filled(static_cast<size_t>(n_docs * kd * d), 5);
    auto query = filled(static_cast<size_t>(kq * d), 6);
    std::vector<double> scores(static_cast<size_t>(n_docs));
    for (auto _ : state) {
        kernels::maxsim_scores_omp(docs.data(), n_docs, query.data(), kq, kd, d, scores.data());
        benchmark::DoNotOptimize(scores.data());
    }
    state.SetItemsProcessed(state.iterations() * n_docs);
}

BENCHMARK(bm_gemm_nn_serial)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(bm_gemm_nn_omp)->Arg(64)->Arg(256)->Arg(512)->UseRealTime();
BENCHMARK(bm_dot_scores_serial)->Arg(1000)->Arg(100000);
BENCHMARK(bm_dot_scores_omp)->Arg(1000)->Arg(100000)->UseRealTime();
BENCHMARK(bm_maxsim_scores_serial)->Arg(100)->Arg(2000);
BENCHMARK(bm_maxsim_scores_omp)->Arg(100)->Arg(2000)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
