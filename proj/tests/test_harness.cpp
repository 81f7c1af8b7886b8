#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "kspde/acceptance.hpp"
#include "kspde/ensemble.hpp"

using namespace kspde;
namespace fs = std::filesystem;

TEST_CASE("config json round trip") {
  for (const SimConfig& c : {SimConfig::standard(), SimConfig::coarse()}) {
    const nlohmann::json j = c.to_json();
    CHECK(SimConfig::from_json(j).to_json() == j);
  }
  SimConfig c = SimConfig::standard();
  c.n = kNoTruncation;
  c.output_times = {0.1, 0.25};
  const nlohmann::json j = c.to_json();
  CHECK(j.at("n") == "inf");
  CHECK(SimConfig::from_json(j).output_steps() == std::vector<int>{10, 25});
}

TEST_CASE("config validation") {
  nlohmann::json j = SimConfig::standard().to_json();
  j["unexpected"] = 1;
  CHECK_THROWS_AS(SimConfig::from_json(j), ValidationError);
  j = SimConfig::standard().to_json();
  j["schema"] = "other/1";
  CHECK_THROWS_AS(SimConfig::from_json(j), ValidationError);
  j = SimConfig::standard().to_json();
  j["f0"]["kind"] = "no_such_profile";
  CHECK_THROWS_AS(SimConfig::from_json(j), ValidationError);
  SimConfig c = SimConfig::standard();
  c.f0.width = 1.5;  // support radius 0.58 + 4.5 exceeds vmax / sqrt 2
  CHECK_THROWS_AS(c.validate(), ValidationError);
  try {
    SimConfig::load("definitely_missing.json");
    FAIL("expected an exception");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("definitely_missing.json") != std::string::npos);
  }
}

TEST_CASE("path seeds do not depend on the ensemble size") {
  CHECK(path_seed(99, 3) == derive_seed(99, 3));
  CHECK(path_seed(99, 3) != path_seed(99, 4));
  CHECK(resolve_threads(3) == 3);
}

TEST_CASE("single path without noise or collisions is deterministic transport") {
  SimConfig c = SimConfig::coarse();
  c.M = 1;
  c.collisions = false;
  c.noise = test::zero_noise();
  c.T = 0.1;
  const EnsembleReport rep = run_ensemble(c);
  REQUIRE(rep.failures() == 0);
  const NoiseModel m = c.noise_model();
  const BrownianPath path = BrownianPath::sample(path_seed(c.seed, 0), c.dt, c.n_steps(), 2);
  const Trajectory tr = solve_transport(c.f0.sample(c.grid), {}, m, path, c.T);
  CHECK(rep.paths[0].balance.mass.back() == mass(tr.fields.back()));
  CHECK(rep.paths[0].balance.entropy.back() == entropy(tr.fields.back()));
}

TEST_CASE("ensembles are reproducible and write the artifact tree") {
  SimConfig c = SimConfig::coarse();
  c.M = 3;
  c.T = 0.08;
  c.output_times = {0.04, 0.08};
  const std::string a = (fs::temp_directory_path() / "kspde_ens_a").string();
  const std::string b = (fs::temp_directory_path() / "kspde_ens_b").string();
  fs::remove_all(a);
  fs::remove_all(b);
  RunOptions ra;
  ra.out_dir = a;
  RunOptions rb;
  rb.out_dir = b;
  rb.threads = 2;
  const EnsembleReport x = run_ensemble(c, ra);
  const EnsembleReport y = run_ensemble(c, rb);
  CHECK(x.to_json() == y.to_json());
  CHECK(fs::exists(a + "/config.json"));
  CHECK(fs::exists(a + "/summary.json"));
  CHECK(fs::exists(a + "/paths/path_0002/manifest.json"));
  CHECK(fs::exists(a + "/paths/path_0002/balance.csv"));
  CHECK(fs::exists(a + "/paths/path_0002/snapshots/f_00004.bin"));
  CHECK(compare_trees(a, b).empty());
  CHECK(SimConfig::load(a + "/config.json").to_json() == c.to_json());
}

TEST_CASE("ensemble means agree across ensemble sizes") {
  SimConfig c = SimConfig::coarse();
  c.collisions = false;
  c.T = 0.12;
  c.diagnostics.snapshots = false;
  c.M = 16;
  const EnsembleReport small = run_ensemble(c);
  c.M = 64;
  const EnsembleReport big = run_ensemble(c);
  for (std::size_t k = 0; k < small.final_means.size(); ++k) {
    const auto& s = small.final_means[k];
    const auto& l = big.final_means[k];
    CAPTURE(s.name);
    CHECK(std::abs(s.mean - l.mean) <= 3.0 * std::hypot(s.se, l.se) + 1e-12 * std::abs(l.mean));
  }
}
