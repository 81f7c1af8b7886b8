#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kspde/collision.hpp"
#include "kspde/kinetic_solver.hpp"
#include "kspde/noise_model.hpp"
#include "kspde/phase_field.hpp"
#include "kspde/stochastic_flow.hpp"

namespace kspde {

double gamma_m(double z, double m);
double gamma_m_prime(double z, double m);
/// z * Gamma_m'(z).
double gamma_m_small(double z, double m);

class Renormalization {
 public:
  enum class Kind { kIdentity, kGammaM, kBetaDelta, kLog1p, kCustom };

  static Renormalization identity();
  static Renormalization gamma(double m);
  static Renormalization beta(double delta);
  static Renormalization log1p();
  static Renormalization custom(std::string name, std::function<double(double)> g,
                                std::function<double(double)> dg, std::function<double(double)> d2g);

  Kind kind() const { return kind_; }
  double param() const { return param_; }
  const std::string& name() const { return name_; }
  double value(double z) const;
  double deriv(double z) const;
  double second(double z) const;
  /// sup over z >= 0 of (1 + z)|Gamma'(z)|, sampled on a log grid up to 1e8.
  double admissibility_sup() const;

 private:
  Kind kind_ = Kind::kIdentity;
  double param_ = 0.0;
  std::string name_ = "identity";
  std::function<double(double)> g_, dg_, d2g_;
};

struct GapBound {
  double lhs = 0.0;  ///< ||f - Gamma_m(f)||_{L1}
  double rhs = 0.0;  ///< m^{-1/2} ||f||_{L1} + ||f 1_{f >= sqrt m}||_{L1}
  bool holds() const { return lhs <= rhs * (1.0 + 1e-14); }
};
GapBound renorm_gap_bound(const DistributionField& f, double m);

/// phi(x, v) = cos(2 pi k.x / L + phase) * bump(|v - c| / r), bump(s) = exp(1 - 1/(1 - s^2)).
struct TestFunction {
  std::array<int, 2> k{0, 0};
  double phase = 0.0;
  Vec2 center{0.0, 0.0};
  double radius = 1.0;

  struct Jet {
    double value = 0.0;
    Vec2 grad_x{0.0, 0.0};
    Vec2 grad_v{0.0, 0.0};
    Mat2 hess_v{};
  };
  Jet jet(const Vec2& x, const Vec2& v, double lx) const;
};

struct WeakResidualOptions {
  /// Coefficient in front of <Gamma(f), L_sigma phi> dt. The Stratonovich-to-Ito
  /// conversion gives 1 with a = 1/2 sum sigma (x) sigma.
  double ito_coefficient = 1.0;
};

/// Signed weak-form residual at every stored step of a trajectory (one entry per
/// step, starting at 0 for t = 0). Needs a trajectory holding every step.
/// The collision term is Gamma'(f_j) g_j with g_j = traj.drivers[j] when
/// stored, else B_n(f_j) evaluated with `op` (skipped if op is null).
std::vector<double> weak_residual(const Trajectory& traj, const Renormalization& gamma, const TestFunction& phi,
                                  const CollisionOperator* op, double n, const NoiseModel& model,
                                  const BrownianPath& path, const WeakResidualOptions& opts = {});

/// Rejects phi unless its velocity support clears the noise collar (2 cells).
void validate_test_function(const TestFunction& phi, const PhaseGrid& grid);

struct CommutatorReport {
  std::vector<double> eps;
  std::vector<double> single_l2;  ///< (sum_k ||[eta_eps, sigma_k . grad_v] f||_2^2)^{1/2}
  std::vector<double> double_l1;  ///< sum_k ||[[eta_eps, sigma_k . grad_v], sigma_k . grad_v] f||_1
  double single_slope = 0.0;      ///< least-squares slope of log single_l2 vs log eps
  double double_slope = 0.0;
};

/// Mollifier acts in v (tensor product of 1-D bumps of radius eps); x is a
/// parameter. Values beyond the velocity box are edge-extended. Norms are over
/// the grid nodes of the phase field.
CommutatorReport commutator_norms(const DistributionField& f, const NoiseModel& model, const std::vector<double>& eps);

/// rho(x) = sum_v f(x, v) phi(v) h_v^2, one entry per position node.
std::vector<double> velocity_average(const DistributionField& f, const std::function<double(const Vec2&)>& phi);

struct H16Estimate {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio() const { return rhs > 0.0 ? lhs / rhs : 0.0; }
};

/// lhs = sum_t dt sum_xi w(xi) |rho_hat(t, xi)|^2 h_x^2 with the unitary DFT and
/// w = 1 + |xi|^{1/3} for |xi| >= 1, 1 below (w = 1 throughout if unit_weight).
/// rhs = ||f0||^2 + sum_t dt (||f_t||^2 + ||g_t||^2). `g` may be empty.
H16Estimate h16_estimate(const PhaseGrid& grid, const std::vector<std::vector<double>>& rho, double dt,
                         const std::vector<const DistributionField*>& f, const std::vector<const std::vector<double>*>& g,
                         const DistributionField& f0, bool unit_weight = false);

/// Only the weighted Fourier sum (lhs) of a rho series.
double h16_lhs(const PhaseGrid& grid, const std::vector<std::vector<double>>& rho, double dt, bool unit_weight);

}  // namespace kspde
