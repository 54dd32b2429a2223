#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace eto {

/// splitmix64 step; used for seeding and for deriving per-trial seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic seed for trial `index` under a master seed. Stable across
/// platforms and independent of scheduling, so parallel trial workers
/// reproduce the sequential results. Master and index are hashed separately
/// before combining; mixing them in one pass leaves detectable correlations
/// between the streams of nearby masters.
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t a = master ^ 0x9e3779b97f4a7c15ULL;
    std::uint64_t b = index + 0x6a09e667f3bcc909ULL;
    std::uint64_t s = splitmix64(a) ^ splitmix64(b);
    return splitmix64(s);
}

/// xoshiro256** generator. All randomness in the library flows through this
/// class rather than <random> distributions, so streams are bit-reproducible
/// on any platform and compiler.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        // rejection sampling to stay unbiased
        const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
        std::uint64_t x;
        do {
            x = next();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller (pair cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4] = {};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace eto
