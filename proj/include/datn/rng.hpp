#pragma once

#include <cstdint>
#include <random>

namespace datn {

// Deterministic RNG used by generators: mt19937_64 seeded directly, uniform
// doubles from the top 53 bits. Stable across platforms, which is what makes
// seeded traces a reproducibility contract.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double next_unit() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double next_double(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Uniform in [0, n).
    std::size_t next_index(std::size_t n) {
        return static_cast<std::size_t>(engine_() % n);
    }

    bool next_bool() { return (engine_() & 1u) != 0; }

private:
    std::mt19937_64 engine_;
};

}  // namespace datn
