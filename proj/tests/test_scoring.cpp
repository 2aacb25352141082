// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "ret2/scoring.hpp"

using namespace ret2;

TEST_CASE("late-interaction score on hand-checked inputs") {
    // Q = [[1,0],[0,1]], D = [[2,1],[0,3]].
    // Row 0 sims: (2, 0) -> 2; row 1 sims: (1, 3) -> 3; total 5.
    std::vector<double> q{1, 0, 0, 1};
    std::vector<double> d{2, 1, 0, 3};
    CHECK(maxsim_score(q, 2, d, 2, 2) == doctest::Approx(5.0).epsilon(1e-15));

    Tensor qt = constant({2, 2}, q);
    Tensor dt = constant({2, 2}, d);
    CHECK(maxsim_pair(qt, dt).value() == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("late-interaction score with duplicated document rows") {
    // Duplicating all document rows must not change the score.
    Rng rng(1);
    std::vector<double> q(3 * 4), d(5 * 4);
    for (auto& v : q) v = rng.gaussian();
    for (auto& v : d) v = rng.gaussian();
    std::vector<double> d2(d);
    d2.insert(d2.end(), d.begin(), d.end());
    double a = maxsim_score(q, 3, d, 5, 4);
    double b = maxsim_score(q, 3, d2, 10, 4);
    CHECK(a == doctest::Approx(b).epsilon(1e-15));
}

TEST_CASE("single-vector late interaction reduces to a dot product") {
    Rng rng(2);
    std::vector<double> q(6), d(6);
    for (auto& v : q) v = rng.gaussian();
    for (auto& v : d) v = rng.gaussian();
    double dot = 0.0;
    for (int i = 0; i < 6; ++i) dot += q[static_cast<size_t>(i)] * d[static_cast<size_t>(i)];
    CHECK(maxsim_score(q, 1, d, 1, 6) == doctest::Approx(dot).epsilon(1e-14));
    CHECK(fusion_score(q, 1, d, 1, 6) == doctest::Approx(dot).epsilon(1e-14));
}

TEST_CASE("sum-pooled score equals the double sum of dot products") {
    Rng rng(3);
    const int64_t kq = 3, kd = 4, dim = 5;
    std::vector<double> q(static_cast<size_t>(kq * dim)), d(static_cast<size_t>(kd * dim));
    for (auto& v : q) v = rng.gaussian();
    for (auto& v : d) v = rng.gaussian();
    double want = 0.0;
    for (int64_t i = 0; i < kq; ++i)
        for (int64_t j = 0; j < kd; ++j)
            for (int64_t t = 0; t < dim; ++t)
                want += q[static_cast<size_t>(i * dim + t)] * d[static_cast<size_t>(j * dim + t)];
    CHECK(fusion_score(q, kq, d, kd, dim) == doctest::Approx(want).epsilon(1e-12));

    Tensor qt = constant({kq, dim}, q);
    Tensor dt = constant({kd, dim}, d);
    CHECK(score_fusion_pair(qt, dt).value() == doctest::Approx(want).epsilon(1e-12));

    std::vector<double> zeros(static_cast<size_t>(kd * dim), 0.0);
    CHECK(fusion_score(q, kq, zeros, kd, dim) == 0.0);
}

TEST_CASE("sum-pooled hand case") {
    // Q = [[1,0],[0,1]], D = [[2,1],[0,3]]: sum(Q) = (1,1), sum(D) = (2,4) -> 6.
    std::vector<double> q{1, 0, 0, 1};
    std::vector<double> d{2, 1, 0, 3};
    CHECK(fusion_score(q, 2, d, 2, 2) == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("similarity matrices agree with pairwise scores") {
    Rng rng(4);
    const int64_t batch = 3, k = 2, dim = 4;
    std::vector<Tensor> qs, ds;
    std::vector<std::vector<double>> qraw, draw;
    for (int64_t b = 0; b < batch; ++b) {
        std::vector<double> q(static_cast<size_t>(k * dim)), d(static_cast<size_t>(k * dim));
        for (auto& v : q) v = rng.gaussian();
        for (auto& v : d) v = rng.gaussian();
        qs.push_back(constant({k, dim}, q));
        ds.push_back(constant({k, dim}, d));
        qraw.push_back(q);
        draw.push_back(d);
    }
    Tensor fusion = similarity_matrix_fusion(qs, ds);
    Tensor late = similarity_matrix_maxsim(qs, ds);
    REQUIRE(fusion.shape() == Shape{batch, batch});
    REQUIRE(late.shape() == Shape{batch, batch});
    for (int64_t i = 0; i < batch; ++i)
        for (int64_t j = 0; j < batch; ++j) {
            double f = fusion_score(qraw[static_cast<size_t>(i)], k,
                                    draw[static_cast<size_t>(j)], k, dim);
            double m = maxsim_score(qraw[static_cast<size_t>(i)], k,
                                    draw[static_cast<size_t>(j)], k, dim);
            CHECK(fusion.at(i, j) == doctest::Approx(f).epsilon(1e-12));
            CHECK(late.at(i, j) == doctest::Approx(m).epsilon(1e-12));
        }
}

TEST_CASE("contrastive loss on uniform logits equals log batch size") {
    for (int64_t batch : {2, 4, 7}) {
        Tensor sim = zeros({batch, batch});
        Tensor loss = infonce(sim);
        CHECK(loss.value() ==
              doctest::Approx(std::log(static_cast<double>(batch))).epsilon(1e-12));
    }
}

TEST_CASE("contrastive loss vanishes when the diagonal dominates") {
    const int64_t batch = 4;
    std::vector<double> data(static_cast<size_t>(batch * batch), 0.0);
    for (int64_t i = 0; i < batch; ++i) data[static_cast<size_t>(i * batch + i)] = 60.0;
    Tensor loss = infonce(constant({batch, batch}, data));
    CHECK(loss.value() < 1e-12);
    CHECK(loss.value() >= 0.0);
}

TEST_CASE("contrastive loss matches a direct log-softmax computation") {
    std::vector<double> s{0.8, -0.2, 0.1, 0.3, 1.1, -0.5, -0.7, 0.2, 0.9};
    const int64_t batch = 3;
    auto ce_rows = [&](bool transpose) {
        double total = 0.0;
        for (int64_t i = 0; i < batch; ++i) {
            double mx = -1e300;
            for (int64_t j = 0; j < batch; ++j) {
                double v = transpose ? s[static_cast<size_t>(j * batch + i)]
                                     : s[static_cast<size_t>(i * batch + j)];
                mx = std::max(mx, v);
            }
            double z = 0.0;
            for (int64_t j = 0; j < batch; ++j) {
                double v = transpose ? s[static_cast<size_t>(j * batch + i)]
                                     : s[static_cast<size_t>(i * batch + j)];
                z += std::exp(v - mx);
            }
            total += mx + std::log(z) - s[static_cast<size_t>(i * batch + i)];
        }
        return total / static_cast<double>(batch);
    };
    double want = 0.5 * (ce_rows(false) + ce_rows(true));
    Tensor loss = infonce(constant({batch, batch}, s));
    CHECK(std::abs(loss.value() - want) < 1e-10);
}

TEST_CASE("contrastive loss is invariant to matched permutations") {
    // Permuting queries and documents together relabels pairs only.
    Rng rng(5);
    const int64_t batch = 5;
    std::vector<double> s(static_cast<size_t>(batch * batch));
    for (auto& v : s) v = rng.gaussian();
    std::vector<int64_t> perm{3, 0, 4, 1, 2};
    std::vector<double> sp(static_cast<size_t>(batch * batch));
    for (int64_t i = 0; i < batch; ++i)
        for (int64_t j = 0; j < batch; ++j)
            sp[static_cast<size_t>(i * batch + j)] = s[static_cast<size_t>(
                perm[static_cast<size_t>(i)] * batch + perm[static_cast<size_t>(j)])];
    double a = infonce(constant({batch, batch}, s)).value();
    double b = infonce(constant({batch, batch}, sp)).value();
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("temperature scales logits before the loss") {
    std::vector<double> s{2.0, 0.5, -1.0, 1.5};
    Tape tape;
    Tensor sim = constant({2, 2}, s);
    Tensor temp = tape.leaf({1}, {0.25});
    double with_temp = infonce(sim, temp).value();
    std::vector<double> scaled(s);
    for (auto& v : scaled) v /= 0.25;
    double direct = infonce(constant({2, 2}, scaled)).value();
    CHECK(with_temp == doctest::Approx(direct).epsilon(1e-12));

    Tape t2;
    Tensor bad = t2.leaf({1}, {0.0});
    CHECK_THROWS_AS(infonce(constant({2, 2}, s), bad), NumericError);
    std::vector<double> inf_sim{1.0, std::numeric_limits<double>::infinity(), 0.0, 1.0};
    CHECK_THROWS_AS(infonce(constant({2, 2}, inf_sim)), NumericError);
    CHECK_THROWS_AS(infonce(constant({2, 3}, std::vector<double>(6, 0.0))), ShapeError);
}

TEST_CASE("gradients flow through loss, similarity, and temperature") {
    const int64_t batch = 3, k = 2, dim = 3;
    Rng rng(6);
    std::vector<double> qdata(static_cast<size_t>(batch * k * dim));
    std::vector<double> ddata(static_cast<size_t>(batch * k * dim));
    for (auto& v : qdata) v = rng.gaussian();
    for (auto& v : ddata) v = rng.gaussian();

    std::vector<Shape> shapes;
    std::vector<std::vector<double>> inits;
    for (int64_t b = 0; b < batch; ++b) {
        shapes.push_back({k, dim});
        inits.emplace_back(qdata.begin() + b * k * dim, qdata.begin() + (b + 1) * k * dim);
        shapes.push_back({k, dim});
        inits.emplace_back(ddata.begin() + b * k * dim, ddata.begin() + (b + 1) * k * dim);
    }
    auto split = [&](const std::vector<Tensor>& leaves) {
        std::pair<std::vector<Tensor>, std::vector<Tensor>> out;
        for (int64_t b = 0; b < batch; ++b) {
            out.first.push_back(leaves[static_cast<size_t>(2 * b)]);
            out.second.push_back(leaves[static_cast<size_t>(2 * b + 1)]);
        }
        return out;
    };

    {
        auto shapes_t = shapes;
        auto inits_t = inits;
        shapes_t.push_back({1});
        inits_t.push_back({0.4});
        auto build = [&](Tape&, const std::vector<Tensor>& leaves) {
            auto [qs, ds] = split(leaves);
            return infonce(similarity_matrix_fusion(qs, ds), leaves.back());
        };
        auto rep = oracles::fd_check(build, shapes_t, inits_t);
        INFO("max rel err ", rep.max_rel);
        CHECK(rep.ok);
    }
    {
        auto build = [&](Tape&, const std::vector<Tensor>& leaves) {
            auto [qs, ds] = split(leaves);
            return infonce(similarity_matrix_maxsim(qs, ds));
        };
        auto rep = oracles::fd_check(build, shapes, inits);
        INFO("max rel err ", rep.max_rel);
        CHECK(rep.ok);
    }
}
