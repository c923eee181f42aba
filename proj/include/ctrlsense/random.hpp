#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ctrlsense {

/// All stochastic code draws from std::mt19937_64. Independent streams are
/// derived from a base seed plus a list of integer keys (stage, grid point,
/// step, ...) through splitmix64 mixing, so results do not depend on the
/// order in which streams are consumed or on the thread count.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = splitmix64(seed);
    for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {}) {
    return Rng{derive_seed(seed, keys)};
}

// Stream tags, so that e.g. the trajectory stream for seed s never collides
// with the observation-noise stream for the same seed.
namespace stream {
inline constexpr std::uint64_t trajectory = 1;
inline constexpr std::uint64_t observation = 2;
inline constexpr std::uint64_t policy = 3;
inline constexpr std::uint64_t dp = 4;
inline constexpr std::uint64_t oracle = 5;
} // namespace stream

} // namespace ctrlsense
