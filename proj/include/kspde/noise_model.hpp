#pragma once

#include <limits>
#include <span>
#include <vector>

#include "kspde/common.hpp"
#include "kspde/phase_field.hpp"

namespace kspde {

/// Radial stream function psi(v) = F(q), q = |v - center|^2 / width^2,
/// F(q) = e * exp(-kappa q - 1/(1 - q)) on q < 1. kappa = 0 is the plain bump.
struct StreamFunction {
  enum class Kind { kBump, kGaussTapered };
  Kind kind = Kind::kBump;
  Vec2 center{0.0, 0.0};
  double width = 1.0;
  double kappa = 2.0;  ///< only used by kGaussTapered

  struct Jet {
    double value = 0.0;
    Vec2 grad{0.0, 0.0};
    Mat2 hess{};
  };
  Jet jet(const Vec2& v) const;
};

struct NoiseMode {
  std::array<int, 2> kx{0, 0};
  double amplitude = 1.0;
  double phase = 0.0;
  StreamFunction stream;
};

struct ColoringReport {
  double h1 = 0.0;  ///< sum_k sup |sigma_k|^2
  double h2 = 0.0;  ///< sum_k sup |grad_v sigma_k|^2 (Frobenius)
  double h3 = 0.0;  ///< (sum_k ||sigma_k||_{W^{1,3}}^2)^{1/2}
  double h4 = 0.0;  ///< sum_k ||(sigma_k . grad_v) sigma_k||_{W^{1,2}}
};

/// Finite family of divergence-free (in v) fields
/// sigma_k(x, v) = c_k(x) grad_perp psi_k(v), c_k(x) = A cos(2 pi kx.x / L + phase),
/// grad_perp = (-d/dv2, d/dv1).
class NoiseModel {
 public:
  NoiseModel() = default;

  /// Validates that every stream support clears the velocity box by a 2-cell collar.
  static NoiseModel make_stream_noise(std::span<const NoiseMode> modes, const PhaseGrid& grid);
  /// Spatially constant fields; no box and no collar. For tests.
  static NoiseModel constant_for_testing(std::vector<Vec2> fields);

  std::size_t num_modes() const { return constant_ ? fields_.size() : modes_.size(); }
  bool is_constant() const { return constant_; }
  const std::vector<NoiseMode>& modes() const { return modes_; }
  double lx() const { return lx_; }
  /// Velocity box that trajectories must stay in (infinite for test fields).
  double vmax() const { return vmax_; }

  Vec2 sigma(std::size_t k, const Vec2& x, const Vec2& v) const;
  /// sigma_k and its v-Jacobian ds[i][j] = d sigma_i / d v_j.
  void sigma_jet(std::size_t k, const Vec2& x, const Vec2& v, Vec2& s, Mat2& ds) const;
  /// sum_k sigma_k(x, v) w_k.
  Vec2 forcing(const Vec2& x, const Vec2& v, const double* w) const;
  /// Ito drift h = 1/2 sum_k (sigma_k . grad_v) sigma_k.
  Vec2 ito_drift(const Vec2& x, const Vec2& v) const;
  /// a = 1/2 sum_k sigma_k (x) sigma_k.
  Mat2 diffusion(const Vec2& x, const Vec2& v) const;
  /// L_sigma phi = div_v(a grad_v phi) = h . grad phi + a : hess phi.
  double generator(const Vec2& x, const Vec2& v, const Vec2& grad_phi, const Mat2& hess_phi) const;
  /// sum_k [v . (sigma_k . grad)sigma_k + |sigma_k|^2], twice L_sigma(|v|^2/2).
  double energy_drift_density(const Vec2& x, const Vec2& v) const;

  ColoringReport coloring_report(const PhaseGrid& grid) const;

 private:
  double spatial(std::size_t k, const Vec2& x) const;
  Vec2 spatial_grad(std::size_t k, const Vec2& x) const;

  bool constant_ = false;
  std::vector<NoiseMode> modes_;
  std::vector<Vec2> fields_;
  double lx_ = 2.0 * kPi;
  double vmax_ = std::numeric_limits<double>::infinity();
};

}  // namespace kspde
