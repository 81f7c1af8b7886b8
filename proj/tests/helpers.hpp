#pragma once

#include <cmath>
#include <vector>

#include "kspde/config.hpp"
#include "kspde/rng.hpp"

namespace kspde::test {

inline DistributionField lobes(const PhaseGrid& g, std::uint64_t s) {
  DistributionField f(g);
  for (int l = 0; l < 3; ++l) {
    const double cx = 2.0 * counter_uniform(s, l, 0, 0) - 1.0;
    const double cy = 2.0 * counter_uniform(s, l, 1, 0) - 1.0;
    const double w = 0.5 + 0.5 * counter_uniform(s, l, 2, 0);
    const double a = 0.2 + counter_uniform(s, l, 3, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const PhasePoint p = g.node(i);
      const double dx = p.v[0] - cx, dy = p.v[1] - cy;
      f[i] += a * std::exp(-(dx * dx + dy * dy) / (2.0 * w * w)) * (1.0 + 0.3 * std::cos(p.x[0] + l));
    }
  }
  return f;
}

inline std::vector<NoiseMode> zero_noise() {
  std::vector<NoiseMode> m = SimConfig::coarse().noise;
  for (auto& x : m) x.amplitude = 0.0;
  return m;
}

}  // namespace kspde::test
