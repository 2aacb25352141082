// Copyright (c) 2026 the ret2 authors.
// SPDX-License-Identifier: Apache-2.0
//
// Shared error types, finiteness checks, and small utilities.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ret2 {

// Exit-code contract for the CLI: 2 config, 3 data, 4 numeric.
struct Error : std::runtime_error {
    Error(std::string what, int exit_code) : std::runtime_error(std::move(what)), code(exit_code) {}
    int code;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(what, 2) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(what, 3) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(what, 4) {}
};

// Shape mismatches are programming/data errors surfaced with the data code.
struct ShapeError : Error {
    explicit ShapeError(const std::string& what) : Error(what, 3) {}
};

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ShapeError(what);
}

// Round a double through IEEE binary32. Values stored in the on-disk formats
// are f32, so anything destined for a file goes through this first to keep
// write/read round trips bit-exact.
inline double through_f32(double x) {
    return static_cast<double>(static_cast<float>(x));
}

// Deterministic random source. mt19937_64 is pinned by the standard, but the
// std distributions are not, so uniform and gaussian draws are derived here
// directly to keep corpora and checkpoints reproducible across compilers.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t raw() { return gen_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; two fresh uniforms per draw.
    double gaussian() {
        const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
    }

    double gaussian(double stddev) { return stddev * gaussian(); }

    bool bernoulli(double rate) { return uniform() < rate; }

    // Fisher-Yates over [0, n).
    std::vector<size_t> permutation(size_t n) {
        std::vector<size_t> p(n);
        for (size_t i = 0; i < n; ++i) p[i] = i;
        for (size_t i = n; i > 1; --i) {
            size_t j = static_cast<size_t>(gen_() % i);
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

  private:
    std::mt19937_64 gen_;
};

// Git-style blob hash ("blob <len>\0<bytes>") of a byte string, hex-encoded.
std::string git_blob_sha1(const std::string& bytes);

// Number of worker threads kernels may use. Honors RET2_THREADS when set,
// otherwise the OpenMP default.
int worker_threads();

}  // namespace ret2
