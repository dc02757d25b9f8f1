#pragma once

#include <cstdint>

#include "lll/lattice.hpp"

namespace lll {

// SplitMix64: the per-stream generator. Streams are keyed by (seed, site)
// so realizations sampled on nested regions agree on shared sites.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0,1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

inline std::uint64_t mix_u64(std::uint64_t a, std::uint64_t b) {
    SplitMix64 g(a ^ (0xBF58476D1CE4E5B9ULL * b));
    g.next();
    return g.next();
}

/// Stream for one lattice site of one realization.
inline SplitMix64 site_stream(std::uint64_t seed, GaussInt n) {
    const auto x = static_cast<std::uint64_t>(n.re);
    const auto y = static_cast<std::uint64_t>(n.im);
    return SplitMix64(mix_u64(mix_u64(seed, x), y));
}

} // namespace lll
