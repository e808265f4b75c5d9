#pragma once

#include <cstdint>
#include <random>

namespace rvlm {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent generator for item `index` of a run seeded with `seed`, so
/// per-item output does not depend on processing order.
inline Rng stream_for(std::uint64_t seed, std::uint64_t index) noexcept {
    return Rng{splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL))};
}

}  // namespace rvlm
