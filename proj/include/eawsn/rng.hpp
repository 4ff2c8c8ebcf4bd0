#pragma once

#include <cstdint>
#include <random>

namespace eawsn {

/// Seeded generator used by every stochastic component (channel loss,
/// counter jitter, Monte Carlo sampling).
///
/// mt19937_64 output and the shift-based double conversion below are fully
/// specified, so a given seed reproduces the same draws on any platform.
/// std::*_distribution is avoided on purpose: its output is
/// implementation-defined and would break byte-identical reruns.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    std::uint64_t next_u64() { return engine_(); }

    /// Derives an independent sub-seed for a named stream (trial index,
    /// channel, node noise, ...). splitmix64 finalizer over the stream
    /// offset; O(1) and collision-resistant for practical stream counts.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace eawsn
