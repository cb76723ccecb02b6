#pragma once

// Counter-based random streams. A draw is a pure function of
// (seed, stream, counter), so any draw sequence can be replayed exactly and
// per-image streams stay deterministic regardless of scheduling.

#include <cmath>
#include <cstdint>

namespace idr {

namespace rng_detail {

inline std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

}  // namespace rng_detail

struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t counter = 0;

    RngStream() = default;
    RngStream(std::uint64_t seed_, std::uint64_t stream_) : seed(seed_), stream(stream_) {}

    // Derive an independent substream; forking does not consume draws.
    RngStream fork(std::uint64_t sub) const {
        return RngStream(seed, rng_detail::mix64(stream ^ (sub * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL)));
    }

    std::uint64_t next_u64() {
        const std::uint64_t x = seed * 0x9fb21c651e98df25ULL + stream * 0xa24baed4963ee407ULL + counter;
        ++counter;
        return rng_detail::mix64(x ^ (x >> 31));
    }

    // Uniform in [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) { return n ? next_u64() % n : 0; }

    // Standard normal via Box-Muller (cosine branch only; two draws per value,
    // nothing cached, so the stream stays replayable from its counter).
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Poisson draw: CDF inversion below mean 30, matched normal approximation
    // above (rounded and clamped at zero).
    std::int64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 30.0) {
            const double u = uniform();
            double p = std::exp(-mean);
            double cdf = p;
            std::int64_t k = 0;
            while (u > cdf && k < 1000) {
                ++k;
                p *= mean / static_cast<double>(k);
                cdf += p;
            }
            return k;
        }
        const double x = mean + std::sqrt(mean) * normal();
        return x < 0.0 ? 0 : static_cast<std::int64_t>(std::llround(x));
    }
};

// Named stream ids fanned out of the single top-level seed.
namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kPatches = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kStudy = 4;
inline constexpr std::uint64_t kCorpus = 5;
inline constexpr std::uint64_t kEval = 6;
}  // namespace streams

}  // namespace idr
