#pragma once

#include <cstdint>
#include <cmath>

namespace radar {

// Splittable counter-based PRNG ("rsplit64", version 1).
//
// Every draw is a 64-bit finalizer applied to (key, counter), so streams are
// pure integer functions of their seed path and behave identically on every
// platform. split(label) derives an independent child stream; the
// split-by-index contract lets callers fan work out across items (chips,
// scenes, epochs) and still reproduce byte-identical results regardless of
// scheduling.
class Rng {
public:
    explicit Rng(uint64_t seed) : key_(mix64(seed ^ 0x9e3779b97f4a7c15ull)) {}

    // Independent child stream; hashes (key, label) jointly.
    Rng split(uint64_t label) const {
        Rng child(0);
        child.key_ = mix64(key_ ^ mix64(label + 0x632be59bd9b4e019ull));
        return child;
    }

    uint64_t next_u64() {
        return mix64(key_ + 0x9e3779b97f4a7c15ull * ++counter_);
    }

    uint32_t next_u32() { return static_cast<uint32_t>(next_u64() >> 32); }

    // Uniform in [0,1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    float next_float() {
        return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
    }

    // Uniform integer in [0, n). n = 0 returns 0.
    uint64_t bounded(uint64_t n) {
        if (n == 0) return 0;
        return static_cast<uint64_t>(
            (static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller, no spare caching: results depend only on the draw index.
    double normal() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;  // avoid log(0)
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(6.283185307179586476925 * u2);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    double rayleigh(double sigma) {
        double u = next_double();
        if (u <= 0.0) u = 0x1.0p-53;
        return sigma * std::sqrt(-2.0 * std::log(u));
    }

    // Stateless draw: hash of two labels without consuming stream state.
    // Used where per-cell noise must not depend on evaluation order.
    static uint64_t hash_u64(uint64_t a, uint64_t b) {
        return mix64(a ^ mix64(b + 0x632be59bd9b4e019ull));
    }

    static uint64_t mix64(uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    uint64_t key_ = 0;
    uint64_t counter_ = 0;
};

}  // namespace radar
