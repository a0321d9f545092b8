#pragma once

#include <cstdint>
#include <string_view>

namespace dm {

// Splittable deterministic generator. A root Rng is built from a 64-bit
// seed; named substreams are derived with stream(), so corruption, weight
// init, dropout and shuffling each consume an independent stream and
// toggling one never perturbs another.
//
// Derivation: splitmix64 over (state ^ fnv1a(label)). Generation:
// xoshiro256** seeded by four splitmix64 draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // Independent child stream identified by a label.
    Rng stream(std::string_view label) const;
    // Independent child stream identified by an index (e.g. iteration).
    Rng stream(std::uint64_t index) const;

    std::uint64_t next_u64();
    // Uniform in [0, 1).
    double uniform();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Standard normal via Box-Muller (deterministic, no cached spare).
    double normal();
    // Uniform integer in [0, n), n > 0.
    std::uint64_t below(std::uint64_t n);

private:
    Rng() = default;
    std::uint64_t state_[4] = {};
    std::uint64_t root_ = 0;  // pre-expansion key, kept for stream derivation
};

}  // namespace dm
