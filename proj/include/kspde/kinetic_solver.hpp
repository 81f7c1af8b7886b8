#pragma once

#include <cstdint>
#include <vector>

#include "kspde/collision.hpp"
#include "kspde/noise_model.hpp"
#include "kspde/phase_field.hpp"
#include "kspde/stochastic_flow.hpp"

namespace kspde {

struct WindowLog {
  int first_step = 0;
  int last_step = 0;
  int iterations = 0;
  std::vector<double> distances;  ///< sup_t ||f_k - f_{k-1}||_{L1}, k = 1, 2, ...
  std::vector<double> ratios;     ///< distances[k] / distances[k-1]
  double max_ratio() const;
};

/// Fields at a set of step indices of a fixed path.
struct Trajectory {
  PhaseGrid grid;
  double dt = 0.0;
  std::vector<int> steps;
  std::vector<DistributionField> fields;
  /// Collision driver g_j used in the Duhamel sum, one per step 0..N-1 (Picard runs only).
  std::vector<std::vector<double>> drivers;
  /// D_n(f(t_j)) integrated over phase space, one per stored step (if computed).
  std::vector<double> dissipation;
  std::vector<WindowLog> windows;
  double lipschitz_estimate = 0.0;  ///< C_n-hat (safety factor included)
  double window_length = 0.0;
  double truncation = kNoTruncation;
  double clamped_mass = 0.0;

  double time(std::size_t k) const { return steps[k] * dt; }
  std::size_t size() const { return steps.size(); }
};

/// f(t) = f0 o Psi_{0,t} + sum_{s_j < t} dt g_j o Psi_{s_j,t}. `drivers` may be
/// empty (pure transport) or hold one field per step. `output_steps` empty means
/// every step. With clamp, negative results are zeroed and their mass recorded.
Trajectory solve_transport(const DistributionField& f0, const std::vector<std::vector<double>>& drivers,
                           const NoiseModel& model, const BrownianPath& path, double T,
                           std::vector<int> output_steps = {}, ClampPolicy clamp = ClampPolicy::kClampNegative);

struct PicardOptions {
  double tol = 1e-9;  ///< relative to the window's starting mass
  int max_iter = 12;
  int probes = 8;
  double safety = 2.0;
  std::uint64_t probe_seed = 12345;
  bool compute_dissipation = true;
};

struct LipschitzProbe {
  double l1_ratio = 0.0;    ///< max ||B_n(f) - B_n(g)||_1 / ||f - g||_1
  double linf_ratio = 0.0;  ///< max ||B_n(f)||_inf / ||f||_inf
};
/// Random pairs f, g = f0 (1 + 0.1 r), r uniform on [-1, 1] per node.
LipschitzProbe probe_lipschitz(const DistributionField& f0, const CollisionOperator& op, double n, int pairs,
                               std::uint64_t seed);

/// Windowed successive approximation from the zero iterate, window length
/// chosen so that C_n-hat * T_w <= 1/2. Throws InvariantViolation when the
/// iteration stops contracting (ratio >= 1 three times running) or exceeds max_iter.
Trajectory picard_solve(const DistributionField& f0, const CollisionOperator& op, double n, const NoiseModel& model,
                        const BrownianPath& path, double T, const PicardOptions& opts = {});

struct PositivityReport {
  double cbar = 0.0;
  double max_violation = 0.0;  ///< max over stored times of [e^{-cbar t} f0 o Psi_{0,t} - f(t)]_+
  double sup_f0 = 0.0;
};
/// Default cbar (< 0 requests it): 1.1 * sup bbar * sup_{x,t} <f>/(1 + <f>/n).
PositivityReport positivity_floor_check(const Trajectory& traj, const DistributionField& f0, const CollisionOperator& op,
                                        const NoiseModel& model, const BrownianPath& path, double cbar = -1.0);

}  // namespace kspde
