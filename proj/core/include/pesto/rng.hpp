#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace pesto {

/// Deterministic PRNG used for every random decision in the engine.
///
/// SplitMix64 core with hand-rolled distributions, so sequences are
/// identical across standard libraries and platforms. Keyed construction
/// (seed + stream ids) lets callers derive independent sub-generators
/// statelessly; training never has to serialize generator state because
/// each step re-derives its stream from (seed, epoch, step, ...).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Derive a generator for a named stream. Mixes each id through the
    /// SplitMix64 finalizer so nearby keys give unrelated streams.
    static Rng keyed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
        std::uint64_t s = seed;
        for (std::uint64_t id : ids) s = mix(s + 0x9e3779b97f4a7c15ULL * (id + 1));
        return Rng(s);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    /// Uniform in [0, 1).
    double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = std::uint64_t(hi - lo) + 1;
        // Rejection sampling keeps the distribution exactly uniform.
        const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % span);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit && span != 0);
        return lo + std::int64_t(x % span);
    }

    /// Standard normal via Box-Muller (no cached spare, stateless resume).
    double gaussian() {
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    /// Fisher-Yates shuffle; avoids std::shuffle whose draws are
    /// implementation-defined.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = std::size_t(uniform_int(0, std::int64_t(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

/// One-shot hash of a key tuple; used for per-element dropout masks.
inline std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace pesto
