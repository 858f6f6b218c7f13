#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace delayrl {

/// Seeded random stream with hand-rolled draw routines so that results are
/// bit-identical across platforms and standard-library versions. All
/// randomness in the project flows through this class.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Deterministically derive an independent stream, e.g. one per run,
    /// per evaluation or per trial. Mixing is splitmix64 over (seed, tag).
    static Rng derive(std::uint64_t seed, std::uint64_t tag);

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    int uniform_int(int n);

    /// Standard normal via Box-Muller (one value per call).
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Index drawn from an explicit probability vector (assumed to sum to 1).
    int categorical(std::span<const double> probs);

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace delayrl
