// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random source. xoshiro256** seeded through splitmix64, so
// streams are reproducible bit-for-bit across platforms and independent of
// the standard library's distribution implementations.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace evrad {

struct Rng {
    std::array<std::uint64_t, 4> s{};

    explicit Rng(std::uint64_t seed = 0) {
        // splitmix64 stream expands the seed into the full state.
        std::uint64_t x = seed;
        for (auto& w : s) {
            x += 0x9e3779b97f4a7c15ull;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            w = z ^ (z >> 31);
        }
    }

    static constexpr std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
        const std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t index(std::uint64_t n) { return next_u64() % n; }

    // Exponential variate with the given rate, for arrival processes.
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
};

// Stateless mix of two words, used to derive per-pixel substream seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace evrad
