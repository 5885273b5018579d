// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace geomtext {

/// FNV-1a 64-bit hash, used to derive independent seeds from structured keys.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64_u64(std::uint64_t v, std::uint64_t h) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Mixes a base seed with a label and numeric keys into a fresh stream seed.
/// Keyed derivation keeps per-record randomness independent of batch grouping.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                                 std::uint64_t k0 = 0, std::uint64_t k1 = 0) {
    std::uint64_t h = fnv1a64(label);
    h = fnv1a64_u64(base, h);
    h = fnv1a64_u64(k0, h);
    h = fnv1a64_u64(k1, h);
    return h;
}

/// Deterministic random stream. mt19937_64 is bit-exact across platforms;
/// the float/gaussian mappings below are fixed here so results do not depend
/// on standard-library distribution internals.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased integer in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n) {
        const std::uint64_t nn = static_cast<std::uint64_t>(n);
        const std::uint64_t lim = UINT64_MAX - UINT64_MAX % nn;
        std::uint64_t x = gen_();
        while (x >= lim) x = gen_();
        return static_cast<std::size_t>(x % nn);
    }

    /// Standard normal via Box-Muller with a cached spare.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace geomtext
