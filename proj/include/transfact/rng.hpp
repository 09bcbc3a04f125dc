#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace transfact {

/// Portable random stream: std::mt19937_64 (output fully specified by the
/// standard) with distribution transforms implemented here, because the
/// std:: distributions are implementation-defined and would break
/// cross-platform reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] (inclusive), rejection-sampled.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Standard normal via Box-Muller (polar-free form, spare cached).
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix64(std::uint64_t x);

/// Named sub-streams derived from one user seed.
enum class SeedStream : std::uint64_t {
    Generator = 1,
    ModelInit = 2,
    Shuffle = 3,
    FrameEncoder = 4,
    MhiEncoder = 5,
    Split = 6,
};

std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream, std::uint64_t index = 0);

} // namespace transfact
