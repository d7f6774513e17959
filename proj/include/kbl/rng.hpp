#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace kbl {

/**
 * Deterministic 64-bit counter-based generator (SplitMix64).
 *
 * The state is a single 64-bit counter advanced by the golden-gamma
 * constant; each output is a finalizer hash of the state, so the stream
 * is a pure function of (seed, draw index) and replays identically on
 * every platform. Substreams are derived by hashing (seed, stream id),
 * which keeps parallel collection deterministic regardless of
 * interleaving.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /// Independent child stream for the given id.
    Rng substream(std::uint64_t id) const {
        return Rng(mix(state_ ^ mix(id + 0x9E3779B97F4A7C15ULL)));
    }

    /// Uniform double in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Lemire multiply-shift; requires n > 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
        using u128 = unsigned __int128;
        return std::uint64_t((u128(next_u64()) * u128(n)) >> 64);
    }

    /// Standard normal via Box-Muller. Consumes two uniforms per call,
    /// no caching, so the draw count per sample is fixed.
    double normal() {
        double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    static std::uint64_t mix(std::uint64_t x) {
        x ^= x >> 30;
        x *= 0xBF58476D1CE4E5B9ULL;
        x ^= x >> 27;
        x *= 0x94D049BB133111EBULL;
        x ^= x >> 31;
        return x;
    }

private:
    std::uint64_t state_;
};

/// Fisher-Yates shuffle driven by the portable generator.
template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = std::size_t(rng.uniform_int(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace kbl
