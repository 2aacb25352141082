// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0

#include "ret2/diagnostics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "ret2/kernels.hpp"

namespace ret2 {

namespace {

constexpr double kPowerTol = 1e-10;
constexpr int kPowerMaxIters = 10000;

// Largest eigenvalue of the PSD Gram matrix g (n x n) by power iteration.
// Restarts guard against a start vector orthogonal to the leading eigenspace;
// the Rayleigh quotient never overshoots on a PSD matrix, so max is safe.
double leading_eigenvalue(const std::vector<double>& g, int64_t n, double scale) {
    double best = 0.0;
    for (uint64_t attempt = 0; attempt < 3; ++attempt) {
        Rng rng(0x5eedULL + attempt);
        std::vector<double> v(static_cast<size_t>(n));
        double norm = 0.0;
        for (auto& x : v) {
            x = rng.gaussian();
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;
        for (auto& x : v) x /= norm;

        std::vector<double> w(static_cast<size_t>(n));
        double lambda = 0.0, prev = -1.0;
        for (int iter = 0; iter < kPowerMaxIters; ++iter) {
            for (int64_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (int64_t j = 0; j < n; ++j)
                    s += g[static_cast<size_t>(i * n + j)] * v[static_cast<size_t>(j)];
                w[static_cast<size_t>(i)] = s;
            }
            lambda = 0.0;
            for (int64_t i = 0; i < n; ++i)
                lambda += v[static_cast<size_t>(i)] * w[static_cast<size_t>(i)];
            if (std::abs(lambda - prev) <= kPowerTol * scale) break;
            prev = lambda;
            double wn = 0.0;
            for (double x : w) wn += x * x;
            wn = std::sqrt(wn);
            if (wn == 0.0) break;  // start vector was in the null space
            for (int64_t i = 0; i < n; ++i) v[static_cast<size_t>(i)] = w[static_cast<size_t>(i)] / wn;
        }
        best = std::max(best, lambda);
    }
    return best;
}

void append_number(std::ostringstream& out, double v) {
    out << std::setprecision(17) << v;
}

}  // namespace

double rank_collapse_score(const std::vector<double>& m, int64_t k, int64_t d) {
    if (k < 2) throw ConfigError("rank collapse: need at least 2 rows");
    if (d < 1 || static_cast<int64_t>(m.size()) != k * d)
        throw ShapeError("rank collapse: matrix size does not match k x d");
    double fro2 = 0.0;
    for (double v : m) fro2 += v * v;
    if (fro2 == 0.0) throw DataError("rank collapse: zero matrix");
    if (!all_finite(m)) throw NumericError("rank collapse: non-finite matrix");

    // Leading singular value via the smaller Gram matrix.
    const int64_t n = std::min(k, d);
    std::vector<double> gram(static_cast<size_t>(n * n), 0.0);
    if (k <= d) {
        kernels::gemm_nt(m.data(), m.data(), gram.data(), k, d, k);
    } else {
        kernels::gemm_tn_acc(m.data(), m.data(), gram.data(), d, k, d);
    }
    const double sigma1_sq = leading_eigenvalue(gram, n, fro2);
    // ||M - M1||_F^2 = ||M||_F^2 - sigma1^2 for the best rank-1 M1.
    return std::sqrt(std::max(0.0, 1.0 - sigma1_sq / fro2));
}

GateProfile profile_gates(const std::vector<CorpusRecord>& sample, const ParamStore& params,
                          const CellConfig& config) {
    if (sample.empty()) throw DataError("gate profile: empty sample");
    BoundParams bound = bind_params(params, nullptr);
    GateProfile prof;
    prof.steps.resize(static_cast<size_t>(config.s));
    EncodeOptions opts;
    opts.log_gates = true;
    for (const auto& rec : sample) {
        EncoderOutput out = encode(rec, bound, config, opts);
        require(out.gate_log.size() == prof.steps.size(), "gate profile: trace length mismatch");
        for (size_t i = 0; i < prof.steps.size(); ++i) {
            const StepTrace& t = out.gate_log[i];
            auto& s = prof.steps[i];
            // Every record contributes k*d elements to each present gate, so
            // the mean of per-record means equals the element-wise mean.
            if (t.forget.present) {
                s.forget += t.forget.mean;
                s.n_forget += 1;
            }
            if (t.input_text.present) {
                s.input_text += t.input_text.mean;
                s.n_input_text += 1;
            }
            if (t.input_visual.present) {
                s.input_visual += t.input_visual.mean;
                s.n_input_visual += 1;
            }
        }
    }
    for (auto& s : prof.steps) {
        if (s.n_forget > 0) s.forget /= static_cast<double>(s.n_forget);
        if (s.n_input_text > 0) s.input_text /= static_cast<double>(s.n_input_text);
        if (s.n_input_visual > 0) s.input_visual /= static_cast<double>(s.n_input_visual);
    }
    return prof;
}

std::string gate_profile_csv(const GateProfile& profile) {
    std::ostringstream out;
    out << "step,gate,mean,n\n";
    for (size_t i = 0; i < profile.steps.size(); ++i) {
        const auto& s = profile.steps[i];
        auto row = [&](const char* gate, double mean, int64_t n) {
            out << (i + 1) << "," << gate << ",";
            if (n > 0) append_number(out, mean);
            out << "," << n << "\n";
        };
        row("forget", s.forget, s.n_forget);
        row("input_text", s.input_text, s.n_input_text);
        row("input_visual", s.input_visual, s.n_input_visual);
    }
    return out.str();
}

std::string collapse_csv(const std::vector<std::pair<std::string, double>>& scores) {
    std::ostringstream out;
    out << "matrix_id,score\n";
    for (const auto& [id, score] : scores) {
        out << id << ",";
        append_number(out, score);
        out << "\n";
    }
    return out.str();
}

}  // namespace ret2
