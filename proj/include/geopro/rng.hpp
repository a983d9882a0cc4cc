#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace geopro {

using Rng = std::mt19937_64;

/// Mixes a 64-bit value (splitmix64 finalizer).
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Independent named stream derived from a root seed ("init", "shuffle", "sampling", ...).
inline Rng substream(std::uint64_t seed, std::string_view name) {
    return Rng(mix64(seed ^ fnv1a64(name)));
}

inline Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
    return Rng(mix64(mix64(seed ^ fnv1a64(name)) + index));
}

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace geopro
