#pragma once

#include <cstdint>

namespace kspde {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z);

/// Stable derived seed for ensemble member i.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t i);

/// Counter-based uniform in (0,1), a pure function of its key.
double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c);

/// Counter-based standard normal (Box-Muller on two keyed uniforms).
double counter_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace kspde
