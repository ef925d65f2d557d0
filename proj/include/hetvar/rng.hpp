#pragma once

#include <cmath>
#include <cstdint>

namespace hetvar {

// Counter-based generator: output i of stream (key) is mix64(key + i*PHI).
// The integer sequence is a pure function of (seed, counter), so any draw is
// reproducible across runs, platforms and thread schedules. Sub-streams are
// derived by hashing a child id into the key; see split().
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(mix64(seed + PHI)), ctr_(0) {}

    std::uint64_t next_u64() { return mix64(key_ + (++ctr_) * PHI); }

    // Uniform on [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; consumes two uniforms, no state cached.
    double normal() {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0,1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * PI * u2);
    }

    // Uniform integer on [0,n), unbiased (rejection on the tail range).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t lim = n * ((~std::uint64_t{0}) / n);
        std::uint64_t x;
        do { x = next_u64(); } while (x >= lim);
        return x % n;
    }

    // Independent child stream; deterministic function of (parent key, id).
    [[nodiscard]] Rng split(std::uint64_t id) const {
        Rng child(0);
        child.key_ = mix64(key_ ^ mix64(id + PHI));
        child.ctr_ = 0;
        return child;
    }

private:
    static constexpr std::uint64_t PHI = 0x9e3779b97f4a7c15ull;
    static constexpr double PI = 3.14159265358979323846;

    // SplitMix64 finalizer (Stafford mix13).
    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t ctr_;
};

}  // namespace hetvar
