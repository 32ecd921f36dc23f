#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace vt {

// Deterministic RNG with named sub-streams. All randomness in the project flows
// from one root seed through forks so component-level reruns are stable.
// Distributions are hand-rolled (not <random> adapters) so output is identical
// across standard library implementations.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    // splitmix64 step
    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // integer in [0, n)
    uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

    // Box-Muller, one value per two draws (no caching, keeps forks independent)
    double normal() {
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // Named sub-stream; independent of draw order on the parent.
    Rng fork(std::string_view name) const {
        uint64_t h = 0xcbf29ce484222325ull;
        for (char c : name) { h ^= (uint8_t)c; h *= 0x100000001b3ull; }
        return Rng(state_ ^ h ^ 0x6a09e667f3bcc909ull);
    }

    Rng fork(uint64_t idx) const {
        uint64_t z = state_ ^ (idx * 0xff51afd7ed558ccdull + 0x2545f4914f6cdd1dull);
        z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ull;
        return Rng(z ^ (z >> 33));
    }

  private:
    uint64_t state_;
};

// Counter-based normal draw: deterministic per (seed, counter) independent of
// evaluation order, used for per-voxel noise inside parallel fills.
inline float hashed_normal(uint64_t seed, uint64_t counter) {
    Rng r(seed ^ (counter * 0x9e3779b97f4a7c15ull + 0x165667b19e3779f9ull));
    return (float)r.normal();
}

}  // namespace vt
