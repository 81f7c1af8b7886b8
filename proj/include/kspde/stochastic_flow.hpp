#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kspde/common.hpp"
#include "kspde/noise_model.hpp"
#include "kspde/phase_field.hpp"

namespace kspde {

/// Increments of K independent Brownian motions on a uniform step grid.
/// Level-0 increments are keyed by (seed, mode, step); refined() splits every
/// step in two with a keyed Brownian bridge, so fine increments always sum to
/// the coarse ones.
class BrownianPath {
 public:
  BrownianPath() = default;
  static BrownianPath sample(std::uint64_t seed, double dt, int n_steps, int num_modes);
  static BrownianPath from_increments(double dt, int num_modes, std::vector<double> increments);

  BrownianPath refined(int levels = 1) const;
  /// Sums consecutive groups of `factor` steps (n_steps must be divisible).
  BrownianPath coarsened(int factor) const;

  double dt() const { return dt_; }
  int n_steps() const { return n_steps_; }
  int num_modes() const { return num_modes_; }
  std::uint64_t seed() const { return seed_; }
  int level() const { return level_; }
  /// Increment of mode k over [t_i, t_{i+1}].
  double increment(int k, int i) const { return incr_[static_cast<std::size_t>(i) * num_modes_ + k]; }
  /// Pointer to the K increments of step i.
  const double* step(int i) const { return incr_.data() + static_cast<std::size_t>(i) * num_modes_; }
  /// beta_k(t_i).
  double value(int k, int i) const;

 private:
  double dt_ = 0.0;
  int n_steps_ = 0;
  int num_modes_ = 0;
  int level_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> incr_;
};

/// Stochastic Heun step of dX = V dt, dV = sum_k sigma_k(X, V) o dbeta_k with
/// step dt and increments db (negated dt and db give the backward step).
inline void heun_step(const NoiseModel& m, PhasePoint& p, double dt, const double* db, double sign) {
  const std::size_t K = m.num_modes();
  double w[32];
  double* ws = w;
  std::vector<double> big;
  if (K > 32) {
    big.resize(K);
    ws = big.data();
  }
  for (std::size_t k = 0; k < K; ++k) ws[k] = sign * db[k];
  const double h = sign * dt;
  const Vec2 f0 = m.forcing(p.x, p.v, ws);
  const Vec2 vt{p.v[0] + f0[0], p.v[1] + f0[1]};
  const Vec2 xt{p.x[0] + p.v[0] * h, p.x[1] + p.v[1] * h};
  const Vec2 f1 = m.forcing(xt, vt, ws);
  const Vec2 xn{p.x[0] + 0.5 * (p.v[0] + vt[0]) * h, p.x[1] + 0.5 * (p.v[1] + vt[1]) * h};
  p.v = {p.v[0] + 0.5 * (f0[0] + f1[0]), p.v[1] + 0.5 * (f0[1] + f1[1])};
  p.x = xn;
}

inline double wrap_torus(double x, double lx) {
  return x - lx * std::floor((x + 0.5 * lx) / lx);
}

enum class Wrap { kTorus, kUnwrapped };

/// Phi_{s,t}: push points from time s to time t >= s along the path.
/// Throws InvariantViolation if a velocity leaves the noise model's box.
std::vector<PhasePoint> integrate_flow(const NoiseModel& m, const BrownianPath& path, double s, double t,
                                       std::vector<PhasePoint> points, Wrap wrap = Wrap::kTorus);

/// Psi_{s,t} = Phi_{s,t}^{-1}: pull points at time t back to time s, using the
/// same increments in reverse order.
std::vector<PhasePoint> inverse_flow(const NoiseModel& m, const BrownianPath& path, double s, double t,
                                     std::vector<PhasePoint> points, Wrap wrap = Wrap::kTorus);

/// Images of all grid nodes under Phi_{s,t} or Psi_{s,t}.
struct FlowMap {
  PhaseGrid grid;
  double s = 0.0;
  double t = 0.0;
  bool inverse = true;
  std::uint64_t seed = 0;
  std::vector<PhasePoint> images;
};

FlowMap compute_flow_map(const PhaseGrid& grid, const NoiseModel& m, const BrownianPath& path, double s,
                         double t, bool inverse);

/// f o map (nodes pulled back through the stored images).
DistributionField compose(const DistributionField& f, const FlowMap& map,
                          ClampPolicy policy = ClampPolicy::kClampNegative);

/// Raw float64 array of shape (nodes, 4) = (x1, x2, v1, v2) plus a JSON
/// sidecar {shape, s, t, seed}.
void write_flow_map(const std::string& path_stem, const FlowMap& map);

struct GrowthStat {
  double growth = 0.0;      ///< max |Phi_{s,t}(z)| / (1 + |z|)^2
  double reciprocal = 0.0;  ///< max (1 + |z|) / (1 + |Phi_{s,t}(z)|)^2
};
/// Maximum over samples and step-aligned s <= t <= T, with unwrapped positions
/// and |z| = |x| + |v|.
GrowthStat flow_growth_stat(const NoiseModel& m, const BrownianPath& path, double T,
                            std::span<const PhasePoint> samples);

/// det D Phi_{s,t}(z) by central differences of step fd_h on unwrapped coordinates.
double jacobian_det(const NoiseModel& m, const BrownianPath& path, double s, double t, const PhasePoint& z,
                    double fd_h = 1e-5);

}  // namespace kspde
