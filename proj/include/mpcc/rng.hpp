#pragma once

#include <cstdint>
#include <random>

namespace mpcc {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of the stream with the given index: splitmix64 over
/// base + index * golden-ratio increment. Index 0 is not the base seed itself.
inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
    return splitmix64(base + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

/// mt19937_64 with a platform-independent uniform draw. The standard
/// distributions are implementation-defined, so they are avoided here to
/// keep trajectories identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) noexcept { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

}  // namespace mpcc
