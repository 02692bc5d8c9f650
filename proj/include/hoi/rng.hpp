#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hoi {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// All sampling is derived from raw mt19937_64 output with fixed arithmetic, so
// streams are bit-identical across platforms and standard library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n).
    uint64_t uniform_int(uint64_t n) {
        const uint64_t min = (0 - n) % n;
        uint64_t r = engine_();
        while (r < min) r = engine_();
        return r % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller transform; consumes two uniforms per draw.
    double normal(double mean, double stddev) {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        return mean + stddev * z;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace hoi
