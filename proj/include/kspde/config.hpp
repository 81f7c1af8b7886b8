#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "kspde/collision.hpp"
#include "kspde/kinetic_solver.hpp"
#include "kspde/noise_model.hpp"
#include "kspde/phase_field.hpp"

namespace kspde {

inline constexpr const char* kConfigSchema = "kspde.config/1";

struct Diagnostics {
  bool dissipation = true;  ///< D_n per stored step
  bool snapshots = true;    ///< field snapshots at output times
  bool balance = true;      ///< per-path balance CSV
};

struct SimConfig {
  PhaseGrid grid;
  KernelSpec kernel;
  bool collisions = true;
  std::vector<NoiseMode> noise;
  InitialCondition f0;
  double T = 0.25;
  double dt = 0.01;
  std::vector<double> output_times;  ///< empty: every step
  double n = 10.0;                   ///< truncation parameter
  PicardOptions picard;
  int M = 1;
  std::uint64_t seed = 1;
  Diagnostics diagnostics;

  int n_steps() const;
  /// Step indices of output_times (all steps when empty).
  std::vector<int> output_steps() const;
  /// Throws ValidationError naming the first problem found.
  void validate() const;
  NoiseModel noise_model() const;

  nlohmann::json to_json() const;
  static SimConfig from_json(const nlohmann::json& j);
  static SimConfig load(const std::string& file);
  void save(const std::string& file) const;

  /// Shipped scenarios.
  static SimConfig standard();
  /// Coarse, narrow-stream variant used for ensembles and refinement ladders.
  static SimConfig coarse();
};

}  // namespace kspde
