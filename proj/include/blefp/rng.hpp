// rng.hpp - small deterministic RNG used for fleet sampling, noise, dropout.
// Self-contained so output is identical across standard libraries.
#pragma once

#include <cmath>
#include <cstdint>

namespace blefp {

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Derive an independent stream seed from (base, salt...) pairs.
inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t s = base;
    splitmix64(s);
    s ^= 0xA24BAED4963EE407ULL * (a + 1);
    splitmix64(s);
    s ^= 0x9FB21C651E98DF25ULL * (b + 1);
    splitmix64(s);
    s ^= 0xD6E8FEB86659FD93ULL * (c + 1);
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // Burn a few outputs so small seeds decorrelate.
        next();
        next();
    }

    uint64_t next() { return splitmix64(state_); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; deterministic, no cached spare.
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
    }

    // Integer in [0, n).
    uint64_t below(uint64_t n) { return next() % n; }

private:
    uint64_t state_;
};

}  // namespace blefp
