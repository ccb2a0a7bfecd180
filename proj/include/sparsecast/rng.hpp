// Deterministic random number generation.
//
// Every stochastic choice in the toolkit flows from an explicit 64-bit seed
// through this generator. Distributions are hand-rolled so that results are
// pinned to the bit across runs and standard library versions.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "sparsecast/common.hpp"

namespace sparsecast {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from (base, tag, index). Tags keep
// unrelated consumers (shuffling, init, noise channels...) decorrelated.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0) {
    std::uint64_t h = fnv1a64(tag, base ^ 0x9e3779b97f4a7c15ull);
    h ^= index * 0xff51afd7ed558ccdull + 0x2545f4914f6cdd1dull;
    std::uint64_t s = h;
    return splitmix64(s);
}

// Counter-based generator (xoshiro-free, splitmix core). Cheap to copy.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ^ 0x853c49e6748fea9bull) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) {
        // Multiply-shift rejection-free mapping; bias is < 2^-53 for small n.
        return static_cast<std::uint64_t>(uniform01() * static_cast<double>(n)) % n;
    }

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller (one value per call; the pair's twin is
    // discarded to keep the stream position independent of call parity).
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace sparsecast
