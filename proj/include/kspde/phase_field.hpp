#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kspde/common.hpp"

namespace kspde {

/// Uniform grid on (torus of side lx)^2 x [-vmax, vmax]^2.
/// Position nodes x_i = -lx/2 + i*hx, velocity nodes at cell centres
/// v_j = -vmax + (j + 1/2)*hv. Storage order is (x1, x2, v1, v2), v2 fastest.
struct PhaseGrid {
  int nx = 8;
  int nv = 16;
  double lx = 2.0 * kPi;
  double vmax = 4.0;

  double hx() const { return lx / nx; }
  double hv() const { return 2.0 * vmax / nv; }
  double x_node(int i) const { return -0.5 * lx + i * hx(); }
  double v_node(int j) const { return -vmax + (j + 0.5) * hv(); }
  std::size_t num_x() const { return static_cast<std::size_t>(nx) * nx; }
  std::size_t block() const { return static_cast<std::size_t>(nv) * nv; }
  std::size_t size() const { return num_x() * block(); }
  double cell_volume() const { return hx() * hx() * hv() * hv(); }
  double velocity_cell() const { return hv() * hv(); }
  std::size_t index(int i1, int i2, int j1, int j2) const {
    return ((static_cast<std::size_t>(i1) * nx + i2) * nv + j1) * nv + j2;
  }
  PhasePoint node(std::size_t idx) const;
  void validate() const;
  bool operator==(const PhaseGrid&) const = default;
};

class DistributionField {
 public:
  DistributionField() = default;
  explicit DistributionField(PhaseGrid grid, double t = 0.0)
      : grid_(grid), t_(t), values_(grid.size(), 0.0) {}

  const PhaseGrid& grid() const { return grid_; }
  double time() const { return t_; }
  void set_time(double t) { t_ = t; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> block(std::size_t ix) const {
    return {values_.data() + ix * grid_.block(), grid_.block()};
  }
  std::span<double> block(std::size_t ix) {
    return {values_.data() + ix * grid_.block(), grid_.block()};
  }
  double clamped_mass() const { return clamped_mass_; }
  void set_clamped_mass(double m) { clamped_mass_ = m; }

 private:
  PhaseGrid grid_;
  double t_ = 0.0;
  std::vector<double> values_;
  double clamped_mass_ = 0.0;
};

/// Multilinear interpolation: periodic in x, zero outside the velocity box.
inline double interpolate(const PhaseGrid& g, const double* data, const PhasePoint& p) {
  const double vmax = g.vmax;
  if (std::abs(p.v[0]) > vmax || std::abs(p.v[1]) > vmax) return 0.0;
  const double hx = g.hx(), hv = g.hv();
  const int nx = g.nx, nv = g.nv;
  int ix[2][2];
  double wx[2][2];
  for (int d = 0; d < 2; ++d) {
    const double s = (p.x[d] + 0.5 * g.lx) / hx;
    const double fl = std::floor(s);
    const double a = s - fl;
    int i0 = static_cast<int>(fl) % nx;
    if (i0 < 0) i0 += nx;
    ix[d][0] = i0;
    ix[d][1] = (i0 + 1 == nx) ? 0 : i0 + 1;
    wx[d][0] = 1.0 - a;
    wx[d][1] = a;
  }
  int jv[2][2];
  double wv[2][2];
  for (int d = 0; d < 2; ++d) {
    const double s = (p.v[d] + vmax) / hv - 0.5;
    const double fl = std::floor(s);
    const double a = s - fl;
    const int j0 = static_cast<int>(fl);
    jv[d][0] = j0;
    jv[d][1] = j0 + 1;
    wv[d][0] = 1.0 - a;
    wv[d][1] = a;
  }
  double acc = 0.0;
  const std::size_t bs = static_cast<std::size_t>(nv) * nv;
  for (int a1 = 0; a1 < 2; ++a1) {
    for (int a2 = 0; a2 < 2; ++a2) {
      const double wxx = wx[0][a1] * wx[1][a2];
      const double* blk = data + (static_cast<std::size_t>(ix[0][a1]) * nx + ix[1][a2]) * bs;
      double inner = 0.0;
      for (int b1 = 0; b1 < 2; ++b1) {
        const int j1 = jv[0][b1];
        if (j1 < 0 || j1 >= nv) continue;
        for (int b2 = 0; b2 < 2; ++b2) {
          const int j2 = jv[1][b2];
          if (j2 < 0 || j2 >= nv) continue;
          inner += wv[0][b1] * wv[1][b2] * blk[static_cast<std::size_t>(j1) * nv + j2];
        }
      }
      acc += wxx * inner;
    }
  }
  return acc;
}

inline double interpolate(const DistributionField& f, const PhasePoint& p) {
  return interpolate(f.grid(), f.values().data(), p);
}

enum class ClampPolicy { kClampNegative, kKeepSign };

/// Pull back f through a field of node images: out(node) = f(images[node]).
/// With kClampNegative, negative results are set to 0 and their mass recorded.
DistributionField compose(const DistributionField& f, std::span<const PhasePoint> images,
                          ClampPolicy policy = ClampPolicy::kClampNegative);

using PhaseWeight = std::function<double(const Vec2& x, const Vec2& v)>;

double moment(const DistributionField& f, const PhaseWeight& w);
double mass(const DistributionField& f);
Vec2 momentum(const DistributionField& f);
/// Integral of |v|^2/2 f.
double kinetic_energy(const DistributionField& f);
/// Integral of (1 + |x|^2 + |v|^2) f.
double confinement_moment(const DistributionField& f);
double l1_norm(const DistributionField& f);
double l1_distance(const DistributionField& f, const DistributionField& g);
double l2_norm(const DistributionField& f);
double sup_norm(const DistributionField& f);

/// Integral of f log f with 0 log 0 = 0.
double entropy(const DistributionField& f);

struct EntropySplit {
  double positive = 0.0;  // integral of (f log f)_+
  double negative = 0.0;  // integral of (f log f)_-, reported as a nonnegative number
  /// Pointwise-valid bound on `negative`:
  /// int (|x|^2+|v|^2) f + (1/e) int exp(-(|x|^2+|v|^2)/2).
  double negative_bound = 0.0;
};
EntropySplit entropy_pm(const DistributionField& f);

/// Velocity mass <f>(x) for every position node.
std::vector<double> local_mass(const DistributionField& f);

/// Raw little-endian float64 dump plus JSON sidecar {t, grid, clamped_mass}.
void write_snapshot(const std::string& path_stem, const DistributionField& f);
DistributionField read_snapshot(const std::string& path_stem);

/// Built-in initial data.
struct InitialCondition {
  enum class Kind { kMaxwellian, kDoubleBump, kBox };
  Kind kind = Kind::kDoubleBump;
  // Common spatial modulation rho(x) = 1 + mod_amplitude cos(2 pi k.x / L).
  double mod_amplitude = 0.0;
  std::array<int, 2> mod_k{1, 0};
  // maxwellian
  double rho = 1.0;
  double theta = 1.0;
  Vec2 u{0.0, 0.0};
  // double_bump: amplitude * sum_c exp(-|v - c|^2 / (2 width^2))
  double amplitude = 1.0;
  std::vector<Vec2> centers{{-1.0, 0.0}, {1.0, 0.0}};
  double width = 1.0;
  // box: value on [v_lo, v_hi] (and all x)
  double value = 1.0;
  Vec2 v_lo{-1.0, -1.0};
  Vec2 v_hi{1.0, 1.0};

  double eval(const Vec2& x, const Vec2& v, double lx) const;
  /// Radius of a velocity ball holding the effective support; Gaussian lobes
  /// count out to three standard deviations.
  double support_radius() const;
  DistributionField sample(const PhaseGrid& g) const;
  /// Relative sup error of multilinear interpolation of this datum on g,
  /// probed at phase-cell centres.
  double interpolation_tolerance(const PhaseGrid& g) const;
};

}  // namespace kspde
