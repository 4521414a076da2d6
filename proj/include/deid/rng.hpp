#pragma once

#include <cstdint>
#include <random>

namespace deid {

// Per-iteration RNG streams keyed by (seed, stream index) so that serial and
// parallel schedules draw identical values.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL)));
}

// Uniform draw in [0, n); avoids distribution classes whose output is
// implementation-defined.
inline std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
    // Rejection sampling for an unbiased draw.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
}

}  // namespace deid
