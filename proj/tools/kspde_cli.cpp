// kspde command line: simulations, static test suites, diagnostics, acceptance.

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "kspde/acceptance.hpp"
#include "kspde/collision.hpp"
#include "kspde/config.hpp"
#include "kspde/ensemble.hpp"
#include "kspde/renorm_va.hpp"
#include "kspde/rng.hpp"
#include "kspde/stochastic_flow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kspde;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out;
  std::string format = "binary";
};

void emit_failure(const std::string& kind, const std::string& message, const json& extra = json::object()) {
  json rec = {{"status", "failure"}, {"kind", kind}, {"message", message}};
  for (auto it = extra.begin(); it != extra.end(); ++it) rec[it.key()] = it.value();
  std::cerr << rec.dump() << std::endl;
}

SimConfig load_config(const std::string& file, const Globals& g) {
  SimConfig c = SimConfig::load(file);
  if (g.seed) c.seed = *g.seed;
  return c;
}

void write_json(const std::string& dir, const std::string& name, const json& j) {
  if (dir.empty()) return;
  fs::create_directories(dir);
  std::ofstream(dir + "/" + name) << j.dump(2) << "\n";
}

int cmd_simulate(const std::string& file, const Globals& g, bool collisions) {
  SimConfig cfg = load_config(file, g);
  if (!collisions) cfg.collisions = false;
  cfg.validate();
  RunOptions ro;
  ro.threads = g.threads;
  ro.out_dir = g.out.empty() ? std::string(collisions ? "run_out" : "transport_out") : g.out;
  ro.format = g.format == "csv" ? SnapshotFormat::kCsv : SnapshotFormat::kBinary;
  const EnsembleReport rep = run_ensemble(cfg, ro);
  for (const auto& o : rep.final_means) std::cout << o.name << " = " << o.mean << " +- " << o.se << "\n";
  if (rep.momentum) std::cout << "momentum balance z = " << rep.momentum->max_z() << "\n";
  if (rep.energy) std::cout << "energy identity z = " << rep.energy->identity.z << "\n";
  std::cout << "paths " << rep.paths.size() << ", failed " << rep.failures() << ", output " << ro.out_dir << std::endl;
  if (rep.failures() > 0) {
    json paths = json::array();
    for (const auto& p : rep.paths)
      if (!p.ok) paths.push_back({{"index", p.index}, {"seed", p.seed}, {"kind", p.error_kind}, {"message", p.error}});
    emit_failure("path_failure", std::to_string(rep.failures()) + " path(s) failed", {{"paths", paths}});
    return kExitFail;
  }
  return 0;
}

// Operator checks on the velocity blocks of f0 and on a Maxwellian.
int cmd_collision_test(const std::string& file, const Globals& g) {
  const SimConfig cfg = load_config(file, g);
  const CollisionKernel kernel(cfg.kernel);
  const CollisionOperator op(kernel, VelocityGrid{2, cfg.grid.nv, cfg.grid.vmax});
  const DistributionField f0 = cfg.f0.sample(cfg.grid);
  const std::vector<std::function<double(const Vec2&)>> xis = {
      [](const Vec2&) { return 1.0; }, [](const Vec2& v) { return v[0]; }, [](const Vec2& v) { return v[1]; },
      [](const Vec2& v) { return dot(v, v); }};
  double sym = 0.0, direct = 0.0, most_negative = 0.0;
  std::vector<double> d(op.grid().size());
  for (std::size_t ix = 0; ix < cfg.grid.num_x(); ++ix) {
    for (const auto& xi : xis) {
      const InvariantResidual r = op.invariant_residual(f0.block(ix), xi);
      sym = std::max(sym, std::abs(r.symmetrized) / r.gain_l1);
      direct = std::max(direct, std::abs(r.direct) / r.gain_l1);
    }
    op.dissipation_density(f0.block(ix), cfg.n, d);
    for (double x : d) most_negative = std::min(most_negative, x);
  }
  const double bmax = sup_norm(eval_gain(f0, op));
  double gap = 0.0;
  for (double K : {2.0, std::exp(1.0), 10.0}) gap = std::max(gap, arkeryd_gap(f0, op, K) / bmax);
  std::vector<double> m(op.grid().size()), gp(m.size()), lo(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Vec2 v = op.grid().point(i);
    m[i] = std::exp(-0.5 * dot(v, v)) / (2.0 * kPi);
  }
  op.gain(m, gp);
  op.loss(m, lo);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    num += std::abs(gp[i] - lo[i]);
    den += gp[i];
  }
  const json rep = {{"symmetrized_invariant_residual", sym},
                    {"direct_invariant_residual", direct},
                    {"min_dissipation_density", most_negative},
                    {"arkeryd_gap_relative", gap},
                    {"maxwellian_ratio", num / den}};
  std::cout << rep.dump(2) << std::endl;
  write_json(g.out, "collision_test.json", rep);
  const bool ok = sym <= 1e-12 && most_negative >= 0.0 && gap <= 1e-8;
  if (!ok) {
    emit_failure("invariant", "collision operator check failed", rep);
    return kExitFail;
  }
  return 0;
}

// Volume preservation and growth of the characteristic flow at dt and dt / 2.
int cmd_flow_test(const std::string& file, const Globals& g) {
  const SimConfig cfg = load_config(file, g);
  const NoiseModel nm = cfg.noise_model();
  const int K = static_cast<int>(nm.num_modes());
  const BrownianPath fine = BrownianPath::sample(cfg.seed, cfg.dt / 2.0, 2 * cfg.n_steps(), K);
  std::vector<PhasePoint> pts;
  for (int i = 0; i < 64; ++i) {
    PhasePoint p;
    p.x = {(counter_uniform(cfg.seed, i, 0, 1) - 0.5) * cfg.grid.lx, (counter_uniform(cfg.seed, i, 1, 1) - 0.5) * cfg.grid.lx};
    p.v = {(counter_uniform(cfg.seed, i, 2, 1) - 0.5) * cfg.grid.vmax, (counter_uniform(cfg.seed, i, 3, 1) - 0.5) * cfg.grid.vmax};
    pts.push_back(p);
  }
  json levels = json::array();
  for (int factor : {2, 1}) {
    const BrownianPath path = fine.coarsened(factor);
    double vol = 0.0;
    for (const auto& p : pts) vol = std::max(vol, std::abs(jacobian_det(nm, path, 0.0, cfg.T, p) - 1.0));
    const GrowthStat gs = flow_growth_stat(nm, path, cfg.T, pts);
    levels.push_back({{"dt", path.dt()}, {"max_abs_det_minus_1", vol}, {"growth", gs.growth}, {"reciprocal", gs.reciprocal}});
  }
  const json rep = {{"T", cfg.T}, {"points", pts.size()}, {"levels", levels}};
  std::cout << rep.dump(2) << std::endl;
  write_json(g.out, "flow_test.json", rep);
  return 0;
}

json read_balance_maxima(const std::string& file) {
  std::ifstream is(file);
  if (!is) return json::object();
  std::string line;
  std::getline(is, line);
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
  }
  std::vector<double> mx(cols.size(), 0.0);
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::size_t k = 0;
    for (std::string c; std::getline(ss, c, ',') && k < cols.size(); ++k) mx[k] = std::max(mx[k], std::abs(std::stod(c)));
  }
  json out;
  for (std::size_t k = 0; k < cols.size(); ++k)
    if (cols[k].rfind("residual_", 0) == 0) out["max_abs_" + cols[k]] = mx[k];
  return out;
}

// Residuals, commutators and velocity averages from a simulate output directory.
int cmd_diagnose(const std::string& dir, const Globals& g) {
  if (!fs::is_directory(dir)) throw ValidationError("run directory not found: " + dir);
  const SimConfig cfg = SimConfig::load(dir + "/config.json");
  const NoiseModel nm = cfg.noise_model();
  auto phi = [](const Vec2& v) {
    const double s2 = dot(v, v) / 4.0;
    return s2 >= 1.0 ? 0.0 : std::exp(1.0 - 1.0 / (1.0 - s2));
  };
  json paths = json::array();
  std::vector<fs::path> pdirs;
  if (fs::is_directory(dir + "/paths"))
    for (const auto& e : fs::directory_iterator(dir + "/paths"))
      if (e.is_directory()) pdirs.push_back(e.path());
  std::sort(pdirs.begin(), pdirs.end());
  for (const auto& pd : pdirs) {
    json p = {{"path", pd.filename().string()}};
    p["balance"] = read_balance_maxima((pd / "balance.csv").string());
    json snaps = json::array();
    if (fs::is_directory(pd / "snapshots")) {
      std::vector<fs::path> stems;
      for (const auto& e : fs::directory_iterator(pd / "snapshots"))
        if (e.path().extension() == ".bin") stems.push_back(e.path().parent_path() / e.path().stem());
      std::sort(stems.begin(), stems.end());
      for (const auto& st : stems) {
        const DistributionField f = read_snapshot(st.string());
        const double h = f.grid().hv();
        const CommutatorReport c = commutator_norms(f, nm, {4 * h, 8 * h, 16 * h});
        const std::vector<double> rho = velocity_average(f, phi);
        double r2 = 0.0;
        for (double x : rho) r2 += x * x * f.grid().hx() * f.grid().hx();
        snaps.push_back({{"t", f.time()},
                         {"mass", mass(f)},
                         {"entropy", entropy(f)},
                         {"commutator_eps", c.eps},
                         {"single_l2", c.single_l2},
                         {"double_l1", c.double_l1},
                         {"velocity_average_l2", std::sqrt(r2)}});
      }
    }
    p["snapshots"] = snaps;
    paths.push_back(p);
  }
  const json rep = {{"run", dir}, {"paths", paths}};
  std::cout << rep.dump(2) << std::endl;
  write_json(g.out.empty() ? dir : g.out, "diagnose.json", rep);
  return 0;
}

int cmd_acceptance(const Globals& g, const std::vector<int>& only) {
  AcceptanceOptions o;
  o.only = only;
  if (g.seed) o.seed = *g.seed;
  o.threads = g.threads;
  if (!g.out.empty()) o.out_dir = g.out;
  const AcceptanceReport rep = run_acceptance(o, std::cout);
  if (!rep.all_passed()) {
    json failed = json::array();
    for (const auto& r : rep.results)
      if (!r.pass) failed.push_back({{"id", r.id}, {"name", r.name}, {"detail", r.detail}});
    emit_failure("acceptance", std::to_string(failed.size()) + " criteria failed", {{"criteria", failed}});
    return kExitFail;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic kinetic solver"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Base seed (overrides the config)");
  app.add_option("--threads", g.threads, "Worker threads (default: KSPDE_THREADS, else 1)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--format", g.format, "Snapshot format")->check(CLI::IsMember({"csv", "binary"}));

  std::string config, run_dir;
  auto* sim = app.add_subcommand("simulate", "Full run of a config");
  sim->add_option("config", config, "Config JSON")->required();
  auto* tr = app.add_subcommand("transport", "Run with collisions off");
  tr->add_option("config", config, "Config JSON")->required();
  auto* ct = app.add_subcommand("collision-test", "Operator checks on static fields");
  ct->add_option("config", config, "Config JSON")->required();
  auto* ft = app.add_subcommand("flow-test", "Volume and growth checks of the flow");
  ft->add_option("config", config, "Config JSON")->required();
  auto* dg = app.add_subcommand("diagnose", "Diagnostics on a stored run");
  dg->add_option("run-dir", run_dir, "Output directory of simulate")->required();
  auto* ac = app.add_subcommand("acceptance", "Full acceptance matrix");
  std::vector<int> only;
  ac->add_option("--only", only, "Run only these criteria (skips the determinism rerun)")->check(CLI::Range(1, 17));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*sim) return cmd_simulate(config, g, true);
    if (*tr) return cmd_simulate(config, g, false);
    if (*ct) return cmd_collision_test(config, g);
    if (*ft) return cmd_flow_test(config, g);
    if (*dg) return cmd_diagnose(run_dir, g);
    if (*ac) return cmd_acceptance(g, only);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitValidation;
  } catch (const InvariantViolation& e) {
    emit_failure(e.kind, e.what());
    return kExitFail;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitValidation;
  }
  return kExitUsage;
}
