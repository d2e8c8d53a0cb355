#pragma once
// Portable seeding and sampling helpers. std::*_distribution output differs
// between standard libraries, so everything that must be reproducible goes
// through these instead.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace tracs {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept {
    return splitmix64(seed ^ splitmix64(fnv1a64(key)));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) noexcept {
    return splitmix64(seed ^ splitmix64(key + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

// Unbiased integer in [0, bound) by rejection; bound must be > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % bound;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller; one draw per call, the second value is discarded.
inline double standard_normal(Rng& rng) {
    double u1 = uniform_unit(rng);
    while (u1 <= 0.0) u1 = uniform_unit(rng);
    const double u2 = uniform_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace tracs
