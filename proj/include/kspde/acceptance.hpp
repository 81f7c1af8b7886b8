#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace kspde {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;     ///< one-line summary of the measured values and limits
  nlohmann::json metrics; ///< numeric record written to acceptance.json
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::string out_dir = "acceptance_out";
  int threads = 0;
  std::uint64_t seed = 7;            ///< standard scenario and refinement ladder
  std::uint64_t ensemble_seed = 99;  ///< base seed of the balance ensemble
  bool determinism = true;           ///< criterion 18: rerun everything and compare bytes
  std::vector<int> only;             ///< subset of criteria (empty: all); disables 18
};

struct AcceptanceReport {
  std::vector<CriterionResult> results;
  int passed() const;
  bool all_passed() const { return passed() == static_cast<int>(results.size()); }
};

/// Runs the acceptance matrix, printing one PASS/FAIL line per criterion to
/// `out` followed by a completion line. Numeric artifacts go to out_dir/run1
/// (and out_dir/run2 for the determinism rerun).
AcceptanceReport run_acceptance(const AcceptanceOptions& opts, std::ostream& out);

/// Byte comparison of two artifact trees, ignoring timing.json files.
/// Returns the relative paths that differ or exist in only one tree.
std::vector<std::string> compare_trees(const std::string& a, const std::string& b);

}  // namespace kspde
