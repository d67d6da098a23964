// rng.hpp - deterministic random number generation.
//
// xoshiro256++ seeded through splitmix64. Distribution sampling is written out
// explicitly (Box-Muller, Knuth/normal-approx Poisson) instead of relying on
// <random> distributions, whose output is implementation-defined. Every seed
// therefore reproduces bit-identical sequences across platforms and compilers.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace evpipe {

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : s_) word = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) via rejection.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal, Box-Muller with one cached value.
    double normal() {
        if (has_cache_) {
            has_cache_ = false;
            return cache_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        cache_ = r * std::sin(a);
        has_cache_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 30.0) {
            // Knuth's product method.
            const double limit = std::exp(-mean);
            std::uint64_t k = 0;
            double p = 1.0;
            do {
                ++k;
                p *= uniform();
            } while (p > limit);
            return k - 1;
        }
        // Normal approximation with continuity correction; adequate for the
        // large-mean noise counts used by the simulators.
        const double g = normal(mean, std::sqrt(mean));
        return g <= 0.0 ? 0 : static_cast<std::uint64_t>(g + 0.5);
    }

    double exponential(double mean) {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return -mean * std::log(u);
    }

    // Derives an independent deterministic stream, e.g. one per pixel or per
    // particle, so results do not depend on evaluation order.
    Rng fork(std::uint64_t stream) const {
        std::uint64_t x = s_[0] ^ rotl(stream, 31) ^ (s_[2] + 0x9e3779b97f4a7c15ull);
        Rng child(0);
        for (auto& word : child.s_) word = splitmix64(x);
        child.has_cache_ = false;
        return child;
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t s_[4];
    double cache_ = 0.0;
    bool has_cache_ = false;
};

}  // namespace evpipe
