#pragma once

#include <cmath>
#include <cstdint>

namespace hseg {

// Deterministic RNG with platform-independent float mapping. std::mt19937 is
// pinned by the standard but the distributions are not, so the mappings are
// done by hand here. Same seed -> same stream on every platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    // splitmix64
    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint32_t next_u32() { return static_cast<uint32_t>(next_u64() >> 32); }

    // uniform in [0, 1)
    float uniform() {
        return static_cast<float>(next_u32() >> 8) * (1.0f / 16777216.0f);
    }

    float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    double uniform_double() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    // standard normal via Box-Muller
    float normal() {
        double u1 = uniform_double();
        double u2 = uniform_double();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        return static_cast<float>(r * std::cos(2.0 * 3.14159265358979323846 * u2));
    }

    float normal(float mean, float stddev) { return mean + stddev * normal(); }

    // uniform integer in [0, n)
    uint32_t below(uint32_t n) { return n ? next_u32() % n : 0; }

    int range(int lo, int hi) { // inclusive bounds
        return lo + static_cast<int>(below(static_cast<uint32_t>(hi - lo + 1)));
    }

private:
    uint64_t state_;
};

} // namespace hseg
