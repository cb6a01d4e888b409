#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace faultlab {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; spreads nearby seeds across the state space.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for a named stage derived from the global run seed.
/// FNV-1a over the stage name, folded with the global seed.
constexpr std::uint64_t stage_seed(std::uint64_t global_seed, std::string_view stage) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : stage) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return mix64(h ^ mix64(global_seed));
}

inline double uniform01(Rng& rng) {
    // 53 random mantissa bits; independent of the standard library's distribution code.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform integer in [lo, hi] inclusive.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(span)) % static_cast<std::int64_t>(span);
}

/// Standard normal via Box-Muller (one draw per call).
inline double normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

template <class It>
void shuffle(It first, It last, Rng& rng) {
    const auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
        const auto j = uniform_int(rng, 0, i);
        std::swap(first[i], first[j]);
    }
}

}  // namespace faultlab
