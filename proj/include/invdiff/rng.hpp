#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace invdiff {

/// Counter-based pseudo-random stream (splitmix64 finalizer applied to a
/// running counter). Draw i is a pure function of (seed, i), so streams are
/// reproducible across platforms and independent of call interleaving.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t bits(std::uint64_t i) const {
        std::uint64_t z = seed_ + (i + 1) * 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in (0, 1]; never returns 0 so log() is safe.
    double uniform(std::uint64_t i) const {
        return static_cast<double>((bits(i) >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform integer in [lo, hi] (inclusive). Requires lo <= hi.
    long uniform_int(std::uint64_t i, long lo, long hi) const {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<long>(bits(i) % span);
    }

    /// Standard normal via Box-Muller; draw i consumes uniforms 2i and 2i+1.
    double normal(std::uint64_t i) const {
        const double u1 = uniform(2 * i);
        const double u2 = uniform(2 * i + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
};

/// FNV-1a hash of a stage name, used to derive per-stage sub-seeds from the
/// single user-facing seed.
inline std::uint64_t stage_hash(std::string_view name) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::uint64_t stage_seed(std::uint64_t root_seed, std::string_view stage) {
    return root_seed ^ stage_hash(stage);
}

} // namespace invdiff
