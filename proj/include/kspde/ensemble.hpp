#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kspde/config.hpp"
#include "kspde/observables.hpp"

namespace kspde {

enum class SnapshotFormat { kCsv, kBinary };

/// Everything a per-path hook may look at; valid only during the call.
struct PathContext {
  int index = 0;
  std::uint64_t seed = 0;
  const SimConfig* config = nullptr;
  const NoiseModel* model = nullptr;
  const CollisionOperator* op = nullptr;  ///< null when collisions are off
  const BrownianPath* path = nullptr;
  const Trajectory* traj = nullptr;
};

struct RunOptions {
  int threads = 0;      ///< 0: KSPDE_THREADS, else 1
  std::string out_dir;  ///< empty: no artifacts
  SnapshotFormat format = SnapshotFormat::kBinary;
  /// Called from the worker thread once per successful path.
  std::function<void(const PathContext&)> on_path;
};

struct PathResult {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::string error_kind;  ///< "validation", "invariant" or the InvariantViolation kind
  BalanceReport balance;
  int windows = 0;
  int iterations = 0;
  double max_ratio = 0.0;
  double lipschitz = 0.0;
  double negative_bound = 0.0;  ///< sup_t of the entropy negative-part bound
  double seconds = 0.0;
};

struct ObservableSummary {
  std::string name;
  double mean = 0.0;
  double se = 0.0;
};

struct EnsembleReport {
  SimConfig config;
  std::vector<PathResult> paths;
  std::vector<ObservableSummary> final_means;
  std::vector<MomentEstimate> moments;
  std::optional<MomentumBalance> momentum;
  std::optional<EnergyBalance> energy;
  double wall_seconds = 0.0;

  int failures() const;
  /// Numeric summary without timing fields (reproducible from config and seed).
  nlohmann::json to_json() const;
};

/// seed_i = derive_seed(base, i): adding paths never changes existing ones.
std::uint64_t path_seed(std::uint64_t base, int index);
int resolve_threads(int requested);

/// Runs M independent paths on a bounded worker pool and aggregates the
/// observables. Failed paths are recorded and excluded from the aggregates.
EnsembleReport run_ensemble(const SimConfig& config, const RunOptions& opts = {});

/// Single path: Picard solve (or pure transport with collisions off).
Trajectory run_path(const SimConfig& config, const NoiseModel& model, const CollisionOperator* op,
                    const BrownianPath& path);

}  // namespace kspde
