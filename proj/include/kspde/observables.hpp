#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "kspde/kinetic_solver.hpp"
#include "kspde/noise_model.hpp"
#include "kspde/stochastic_flow.hpp"

namespace kspde {

/// Per stored step of one trajectory. Drift, martingale and collision
/// integrals are left-point sums over [0, t] and need every step stored;
/// for sparse trajectories they are left empty.
struct BalanceReport {
  std::vector<double> t;
  std::vector<double> mass;
  std::vector<Vec2> momentum;
  std::vector<double> energy;               ///< int |v|^2/2 f
  std::vector<double> weighted_moment;      ///< int (1 + |x|^2 + |v|^2) f
  std::vector<double> weighted_log_moment;  ///< int (1 + |x|^2 + |v|^2 + |log f|) f
  std::vector<double> entropy;
  std::vector<double> cum_dissipation;      ///< trapezoid in time of D_n

  std::vector<Vec2> momentum_drift;         ///< int_0^t <f, 1/2 sum (sigma.grad)sigma>
  std::vector<double> energy_drift;         ///< int_0^t <f, L_sigma(|v|^2/2)>
  std::vector<double> energy_drift_paper;   ///< int_0^t <f, sum [v.(sigma.grad)sigma + |sigma|^2]>
  std::vector<Vec2> momentum_martingale;    ///< sum_j sum_k <f_j, sigma_k> dbeta_k(j)
  std::vector<double> energy_martingale;    ///< sum_j sum_k <f_j, v.sigma_k> dbeta_k(j)
  std::vector<double> collision_mass;       ///< int_0^t <g, 1>
  std::vector<Vec2> collision_momentum;     ///< int_0^t <g, v>
  std::vector<double> collision_energy;     ///< int_0^t <g, |v|^2/2>

  std::vector<double> mass_residual;        ///< mass(t) - mass(0)
  std::vector<Vec2> momentum_residual;      ///< p(t) - p(0) - drift - martingale
  std::vector<double> energy_residual;      ///< E(t) - E(0) - drift - martingale
  std::vector<double> entropy_residual;     ///< H(t) + cum D - H(0)

  bool has_integrals() const { return !momentum_drift.empty(); }
  bool finite() const;
};

BalanceReport balance_report(const Trajectory& traj, const NoiseModel& model, const BrownianPath& path);

std::vector<double> mass_balance(const Trajectory& traj);

struct EntropyBalance {
  std::vector<double> residual;  ///< H(t) + int_0^t D_n - H(0)
  std::vector<double> slack;     ///< -residual
};
EntropyBalance entropy_balance(const Trajectory& traj);

struct BalanceTest {
  double lhs = 0.0;
  double rhs = 0.0;
  double se = 0.0;         ///< standard error of the per-path difference lhs_i - rhs_i
  double allowance = 0.0;  ///< discretization allowance added to se
  double z = 0.0;
};

/// Ensemble balances at the final stored time of each report. Every report
/// must hold the drift integrals. `allowance_*` are added to the standard error.
struct MomentumBalance {
  BalanceTest component[2];
  double max_z() const { return std::max(component[0].z, component[1].z); }
};
MomentumBalance momentum_balance(const std::vector<BalanceReport>& ensemble, const Vec2& allowance = {0.0, 0.0});

struct EnergyBalance {
  BalanceTest identity;      ///< E(t) vs E(0) + drift
  double paper_slack = 0.0;  ///< mean [E(0) + paper drift - (E(t) - bias)]
  double paper_se = 0.0;
};
/// `bias` (one per path, optional) is a measured discretization error of E(t)
/// removed before the paper inequality is evaluated.
EnergyBalance energy_balance(const std::vector<BalanceReport>& ensemble, double allowance = 0.0,
                             const std::vector<double>& bias = {});

/// Signed error of the start term of the Duhamel sum at time t:
/// <(I f0) o Psi_{0,t} - f0 o Psi_{0,t}, xi> for xi = 1, v, |v|^2/2, with f0
/// the analytic datum and I the grid interpolant.
struct InterpolationBias {
  double mass = 0.0;
  Vec2 momentum{0.0, 0.0};
  double energy = 0.0;
};
InterpolationBias interpolation_bias(const InitialCondition& ic, const PhaseGrid& grid, const NoiseModel& model,
                                     const BrownianPath& path, double t);

struct MomentEstimate {
  double p = 1.0;
  double estimate = 0.0;  ///< mean over paths of (sup_t weighted_log_moment)^p
  double se = 0.0;
  double negative_bound = 0.0;  ///< mean of (sup_t entropy negative-part bound)^p
};
std::vector<MomentEstimate> moment_bound_series(const std::vector<const Trajectory*>& paths, const std::vector<double>& ps);

/// Columns: t, mass, px, py, energy, weighted_moment, entropy, cum_dissipation,
/// residual_mass, residual_px, residual_py, residual_energy, residual_entropy.
void write_balance_csv(const std::string& file, const BalanceReport& r);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(const std::vector<double>& xs);

/// Least-squares slope of log y against log x over entries with y > 0.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace kspde
