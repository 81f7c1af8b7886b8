#include "kspde/rng.hpp"

#include <cmath>

#include "kspde/common.hpp"

namespace kspde {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t i) {
  return mix64(mix64(base) ^ mix64(i + 0x632be59bd9b4e019ULL));
}

namespace {

std::uint64_t key(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ a);
  h = mix64(h ^ (b * 0xd6e8feb86659fd93ULL));
  h = mix64(h ^ (c + 0x2545f4914f6cdd1dULL));
  return h;
}

double to_unit(std::uint64_t u) {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(u >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

}  // namespace

double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return to_unit(key(seed, a, b, c));
}

double counter_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const std::uint64_t k = key(seed, a, b, c);
  const double u1 = to_unit(k);
  const double u2 = to_unit(mix64(k ^ 0x5851f42d4c957f2dULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

}  // namespace kspde
