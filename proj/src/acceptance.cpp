#include "kspde/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include "kspde/collision.hpp"
#include "kspde/config.hpp"
#include "kspde/ensemble.hpp"
#include "kspde/kinetic_solver.hpp"
#include "kspde/observables.hpp"
#include "kspde/renorm_va.hpp"
#include "kspde/rng.hpp"
#include "kspde/stochastic_flow.hpp"

namespace kspde {

namespace fs = std::filesystem;
using nlohmann::json;

int AcceptanceReport::passed() const {
  int n = 0;
  for (const auto& r : results) n += r.pass ? 1 : 0;
  return n;
}

namespace {

// Tolerances.
constexpr double kSymTol = 1e-12;
constexpr double kDirectOrder = 1.0;
constexpr double kMaxwellRatio = 0.05;
constexpr double kDegenerateTol = 1e-13;
constexpr double kArkerydTol = 1e-8;
constexpr double kVolumeFactor = 10.0;
constexpr double kVolumeSlope = 1.8;
constexpr double kTransportDrift = 0.01;
constexpr double kTransportOrder = 1.8;
constexpr double kRatioSlack = 0.1;
constexpr int kMaxPicardIter = 12;
constexpr double kFloorFactor = 5.0;
constexpr double kMassDrift = 0.01;
constexpr double kMassOrder = 1.0;
constexpr double kZMax = 3.0;
constexpr double kEntropyTol = 0.02;
constexpr double kEntropyOrder = 0.9;
constexpr double kCommSlope = 0.9;
constexpr double kCommZero = 1e-10;
constexpr double kWeakOrder = 0.9;
constexpr double kVaStability = 0.5;
constexpr double kParsevalTol = 1e-12;

constexpr int kRandomFields = 20;

std::string fmt(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3e", x);
  return b;
}

std::string fmt2(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.2f", x);
  return b;
}

// Sum of three Gaussian lobes in v with random centres, widths and heights.
DistributionField random_block(std::uint64_t s, int nv) {
  const PhaseGrid g{1, nv, 2.0 * kPi, 4.0};
  DistributionField f(g);
  for (int l = 0; l < 3; ++l) {
    const double cx = 2.0 * counter_uniform(s, l, 0, 0) - 1.0;
    const double cy = 2.0 * counter_uniform(s, l, 1, 0) - 1.0;
    const double w = 0.5 + 0.5 * counter_uniform(s, l, 2, 0);
    const double a = 0.2 + counter_uniform(s, l, 3, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const PhasePoint p = g.node(i);
      const double dx = p.v[0] - cx, dy = p.v[1] - cy;
      f[i] += a * std::exp(-(dx * dx + dy * dy) / (2.0 * w * w));
    }
  }
  return f;
}

KernelSpec static_kernel(KernelSpec::Kind kind) {
  KernelSpec ks;
  ks.kind = kind;
  ks.radius = 6.0;
  ks.n_theta = 16;
  return ks;
}

const std::vector<std::pair<std::string, std::function<double(const Vec2&)>>>& invariants() {
  static const std::vector<std::pair<std::string, std::function<double(const Vec2&)>>> xs = {
      {"1", [](const Vec2&) { return 1.0; }},
      {"v1", [](const Vec2& v) { return v[0]; }},
      {"v2", [](const Vec2& v) { return v[1]; }},
      {"|v|^2", [](const Vec2& v) { return dot(v, v); }},
  };
  return xs;
}

template <class T>
bool non_increasing(const std::vector<T>& xs) {
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] > xs[i - 1]) return false;
  return true;
}

template <class T>
bool strictly_decreasing(const std::vector<T>& xs) {
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] < xs[i - 1])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Shared runs.

struct StandardRun {
  SimConfig cfg;
  NoiseModel model;
  CollisionKernel kernel;
  std::optional<CollisionOperator> op;
  BrownianPath path;
  DistributionField f0;
  Trajectory traj;
};

struct LadderLevel {
  int nx = 0, nv = 0, nt = 0;
  double hv = 0.0;
  double mass_drift = 0.0;
  double entropy_residual = 0.0;  ///< relative to |H(0)|
  double entropy_excess = 0.0;    ///< max_t [H(t) - H(0)] / |H(0)|
  double violation = 0.0;
  double violation_bound = 0.0;
  std::vector<double> weak;  ///< max_t |residual|, renormalization-major
};

struct Ladder {
  std::vector<LadderLevel> levels;
  std::vector<std::string> weak_labels;
};

struct EnsembleRun {
  EnsembleReport report;
  std::vector<double> entropy_excess;  ///< per ok path, relative
  MomentumBalance momentum;
  EnergyBalance energy;
  Vec2 mom_allowance{0.0, 0.0};
  double energy_allowance = 0.0;
};

class Suite {
 public:
  Suite(const AcceptanceOptions& o, std::string dir) : opts_(o), dir_(std::move(dir)) {}

  CriterionResult run(int id);

 private:
  CriterionResult c1();
  CriterionResult c2();
  CriterionResult c3();
  CriterionResult c4();
  CriterionResult c5();
  CriterionResult c6();
  CriterionResult c7();
  CriterionResult c8();
  CriterionResult c9();
  CriterionResult c10();
  CriterionResult c11();
  CriterionResult c12();
  CriterionResult c13();
  CriterionResult c14();
  CriterionResult c15();
  CriterionResult c16();
  CriterionResult c17();

  const StandardRun& standard();
  const Ladder& ladder();
  const EnsembleRun& ensemble();

  AcceptanceOptions opts_;
  std::string dir_;
  std::optional<StandardRun> standard_;
  std::optional<Ladder> ladder_;
  std::optional<EnsembleRun> ensemble_;
};

const StandardRun& Suite::standard() {
  if (standard_) return *standard_;
  StandardRun& r = standard_.emplace();
  r.cfg = SimConfig::standard();
  r.cfg.seed = opts_.seed;
  r.model = r.cfg.noise_model();
  r.kernel = CollisionKernel(r.cfg.kernel);
  r.op.emplace(r.kernel, VelocityGrid{2, r.cfg.grid.nv, r.cfg.grid.vmax});
  r.path = BrownianPath::sample(r.cfg.seed, r.cfg.dt, r.cfg.n_steps(), static_cast<int>(r.model.num_modes()));
  r.f0 = r.cfg.f0.sample(r.cfg.grid);
  r.traj = run_path(r.cfg, r.model, &*r.op, r.path);
  const BalanceReport b = balance_report(r.traj, r.model, r.path);
  fs::create_directories(dir_ + "/standard");
  r.cfg.save(dir_ + "/standard/config.json");
  write_balance_csv(dir_ + "/standard/balance.csv", b);
  write_snapshot(dir_ + "/standard/f_final", r.traj.fields.back());
  return r;
}

std::vector<TestFunction> weak_test_functions() {
  std::vector<TestFunction> tf(3);
  tf[0].radius = 2.0;
  tf[1].k = {1, 0};
  tf[1].center = {0.4, -0.2};
  tf[1].radius = 1.8;
  tf[2].k = {1, 1};
  tf[2].phase = 0.3;
  tf[2].center = {-0.3, 0.3};
  tf[2].radius = 1.9;
  return tf;
}

// Three nested levels sharing one Brownian path: (N_x, N_v, 1/dt) scaled by 1, 3/2, 2.
const Ladder& Suite::ladder() {
  if (ladder_) return *ladder_;
  Ladder& L = ladder_.emplace();
  const SimConfig base = SimConfig::coarse();
  const double T = base.T;
  const int fine_n = 600;
  const BrownianPath fine = BrownianPath::sample(opts_.seed, 1.0 / fine_n, static_cast<int>(std::lround(T * fine_n)),
                                                 static_cast<int>(base.noise.size()));
  const int levels[3][3] = {{4, 12, 50}, {6, 18, 75}, {8, 24, 100}};
  const std::vector<Renormalization> gammas = {Renormalization::identity(), Renormalization::gamma(4.0),
                                               Renormalization::beta(0.5)};
  const std::vector<TestFunction> tfs = weak_test_functions();
  for (const auto& g : gammas)
    for (std::size_t t = 0; t < tfs.size(); ++t) L.weak_labels.push_back(g.name() + "/phi" + std::to_string(t));

  json rec = json::array();
  for (const auto& lv : levels) {
    SimConfig cfg = base;
    cfg.grid = PhaseGrid{lv[0], lv[1], base.grid.lx, base.grid.vmax};
    cfg.dt = 1.0 / lv[2];
    const NoiseModel model = cfg.noise_model();
    const CollisionKernel kernel(cfg.kernel);
    const CollisionOperator op(kernel, VelocityGrid{2, lv[1], cfg.grid.vmax});
    const BrownianPath path = fine.coarsened(fine_n / lv[2]);
    const DistributionField f0 = cfg.f0.sample(cfg.grid);
    PicardOptions po = cfg.picard;
    po.compute_dissipation = true;
    const Trajectory tr = picard_solve(f0, op, cfg.n, model, path, T, po);

    LadderLevel out;
    out.nx = lv[0];
    out.nv = lv[1];
    out.nt = lv[2];
    out.hv = cfg.grid.hv();
    const double m0 = mass(f0), h0 = entropy(f0);
    for (const auto& f : tr.fields) {
      out.mass_drift = std::max(out.mass_drift, std::abs(mass(f) - m0) / m0);
      out.entropy_excess = std::max(out.entropy_excess, (entropy(f) - h0) / std::abs(h0));
    }
    for (double r : entropy_balance(tr).residual)
      out.entropy_residual = std::max(out.entropy_residual, std::abs(r) / std::abs(h0));
    const PositivityReport pr = positivity_floor_check(tr, f0, op, model, path);
    out.violation = pr.max_violation;
    out.violation_bound = kFloorFactor * cfg.f0.interpolation_tolerance(cfg.grid) * pr.sup_f0;
    for (const auto& g : gammas) {
      for (const auto& phi : tfs) {
        double m = 0.0;
        for (double r : weak_residual(tr, g, phi, &op, cfg.n, model, path)) m = std::max(m, std::abs(r));
        out.weak.push_back(m);
      }
    }
    rec.push_back({{"nx", out.nx},
                   {"nv", out.nv},
                   {"steps_per_unit_time", out.nt},
                   {"mass_drift", out.mass_drift},
                   {"entropy_residual", out.entropy_residual},
                   {"entropy_excess", out.entropy_excess},
                   {"violation", out.violation},
                   {"violation_bound", out.violation_bound},
                   {"weak", out.weak}});
    L.levels.push_back(std::move(out));
  }
  fs::create_directories(dir_ + "/ladder");
  std::ofstream(dir_ + "/ladder/levels.json") << json{{"labels", L.weak_labels}, {"levels", rec}}.dump(2) << "\n";
  return L;
}

// Coarse-scenario ensemble with per-path interpolation bias for the balance allowances.
const EnsembleRun& Suite::ensemble() {
  if (ensemble_) return *ensemble_;
  EnsembleRun& E = ensemble_.emplace();
  SimConfig cfg = SimConfig::coarse();
  cfg.seed = opts_.ensemble_seed;
  cfg.diagnostics.dissipation = false;
  cfg.output_times = {cfg.T};
  std::vector<InterpolationBias> bias(cfg.M);
  std::vector<double> excess(cfg.M, 0.0);
  RunOptions ro;
  ro.threads = opts_.threads;
  ro.out_dir = dir_ + "/ensemble";
  ro.format = SnapshotFormat::kBinary;
  ro.on_path = [&](const PathContext& c) {
    bias[c.index] = interpolation_bias(c.config->f0, c.config->grid, *c.model, *c.path, c.config->T);
    const double h0 = entropy(c.traj->fields.front());
    double ex = 0.0;
    for (const auto& f : c.traj->fields) ex = std::max(ex, (entropy(f) - h0) / std::abs(h0));
    excess[c.index] = ex;
  };
  E.report = run_ensemble(cfg, ro);

  std::vector<BalanceReport> ok;
  std::vector<double> ebias;
  double am[2] = {0.0, 0.0}, ae = 0.0;
  for (const auto& p : E.report.paths) {
    if (!p.ok) continue;
    const BalanceReport& b = p.balance;
    const InterpolationBias& ib = bias[p.index];
    ok.push_back(b);
    E.entropy_excess.push_back(excess[p.index]);
    for (int c = 0; c < 2; ++c) am[c] += std::abs(b.collision_momentum.back()[c]) + std::abs(ib.momentum[c]);
    ae += std::abs(b.collision_energy.back()) + std::abs(ib.energy);
    ebias.push_back(b.collision_energy.back() + ib.energy);
  }
  if (ok.size() >= 2) {
    const double n = static_cast<double>(ok.size());
    E.mom_allowance = {am[0] / n, am[1] / n};
    E.energy_allowance = ae / n;
    E.momentum = momentum_balance(ok, E.mom_allowance);
    E.energy = energy_balance(ok, E.energy_allowance, ebias);
  }
  return E;
}

// ---------------------------------------------------------------------------

CriterionResult Suite::c1() {
  CriterionResult r{1, "collision invariants", false, "", json::object()};
  const CollisionOperator op(CollisionKernel(static_kernel(KernelSpec::Kind::kPseudoMaxwellian)), VelocityGrid{2, 24, 4.0});
  double worst = 0.0;
  for (int s = 0; s < kRandomFields; ++s) {
    const DistributionField f = random_block(s, 24);
    for (const auto& [name, xi] : invariants()) {
      const InvariantResidual ir = op.invariant_residual(f.block(0), xi);
      worst = std::max(worst, std::abs(ir.symmetrized) / ir.gain_l1);
    }
  }
  // Direct form on one smooth field sampled at three resolutions.
  std::vector<double> hs, direct;
  for (int nv : {12, 24, 48}) {
    const CollisionOperator opn(CollisionKernel(static_kernel(KernelSpec::Kind::kPseudoMaxwellian)), VelocityGrid{2, nv, 4.0});
    const DistributionField f = random_block(0, nv);
    double d = 0.0;
    for (const auto& [name, xi] : invariants()) {
      const InvariantResidual ir = opn.invariant_residual(f.block(0), xi);
      d = std::max(d, std::abs(ir.direct) / ir.gain_l1);
    }
    hs.push_back(opn.grid().h());
    direct.push_back(d);
  }
  const double order = loglog_slope(hs, direct);
  r.pass = worst <= kSymTol && order >= kDirectOrder;
  r.detail = "symmetrized " + fmt(worst) + " <= " + fmt(kSymTol) + "; direct order " + fmt2(order) + " >= " + fmt2(kDirectOrder);
  r.metrics = {{"symmetrized_max", worst}, {"h", hs}, {"direct", direct}, {"direct_order", order}};
  return r;
}

CriterionResult Suite::c2() {
  CriterionResult r{2, "dissipation sign", false, "", json::object()};
  long violations = 0, nodes = 0;
  double most_negative = 0.0;
  for (auto kind : {KernelSpec::Kind::kPseudoMaxwellian, KernelSpec::Kind::kMollifiedHardSphere}) {
    const CollisionOperator op(CollisionKernel(static_kernel(kind)), VelocityGrid{2, 24, 4.0});
    std::vector<double> d(op.grid().size());
    for (int s = 0; s < kRandomFields; ++s) {
      const DistributionField f = random_block(s, 24);
      for (double n : {10.0, kNoTruncation}) {
        op.dissipation_density(f.block(0), n, d);
        for (double x : d) {
          ++nodes;
          if (x < 0.0) {
            ++violations;
            most_negative = std::min(most_negative, x);
          }
        }
      }
    }
  }
  r.pass = violations == 0;
  r.detail = std::to_string(violations) + " negative nodes of " + std::to_string(nodes);
  r.metrics = {{"violations", violations}, {"nodes", nodes}, {"most_negative", most_negative}};
  return r;
}

CriterionResult Suite::c3() {
  CriterionResult r{3, "maxwellian equilibrium", false, "", json::object()};
  // A unit Maxwellian has support radius 3, so the box must reach 3 sqrt(2);
  // at V = 4 the zero extension past the box dominates D_n.
  constexpr double kBox = 6.0;
  std::vector<double> ratio, diss;
  std::vector<int> nvs = {24, 36, 48};
  double ratio24 = 0.0;
  for (int nv : nvs) {
    const CollisionOperator op(CollisionKernel(static_kernel(KernelSpec::Kind::kPseudoMaxwellian)), VelocityGrid{2, nv, kBox});
    const VelocityGrid& vg = op.grid();
    std::vector<double> m(vg.size()), gp(vg.size()), lo(vg.size()), d(vg.size());
    for (std::size_t i = 0; i < vg.size(); ++i) {
      const Vec2 v = vg.point(i);
      m[i] = std::exp(-0.5 * dot(v, v)) / (2.0 * kPi);
    }
    op.gain(m, gp);
    op.loss(m, lo);
    op.dissipation_density(m, kNoTruncation, d);
    double num = 0.0, den = 0.0, dd = 0.0;
    for (std::size_t i = 0; i < vg.size(); ++i) {
      num += std::abs(gp[i] - lo[i]);
      den += std::abs(gp[i]);
      dd += d[i];
    }
    ratio.push_back(num / den);
    diss.push_back(dd * vg.cell());
    if (nv == 24) ratio24 = num / den;
  }
  const bool dec = strictly_decreasing(ratio) && strictly_decreasing(diss);
  r.pass = ratio24 <= kMaxwellRatio && dec;
  r.detail = "ratio at 24 " + fmt(ratio24) + " <= " + fmt2(kMaxwellRatio) + "; ratios " + fmt(ratio[0]) + " > " +
             fmt(ratio[1]) + " > " + fmt(ratio[2]) + "; D " + fmt(diss[0]) + " > " + fmt(diss[1]) + " > " + fmt(diss[2]);
  r.metrics = {{"nv", nvs}, {"ratio", ratio}, {"dissipation", diss}};
  return r;
}

CriterionResult Suite::c4() {
  CriterionResult r{4, "one-dimensional degeneracy", false, "", json::object()};
  double worst = 0.0;
  for (auto kind : {KernelSpec::Kind::kPseudoMaxwellian, KernelSpec::Kind::kMollifiedHardSphere}) {
    const CollisionOperator op(CollisionKernel(static_kernel(kind)), VelocityGrid{1, 32, 4.0});
    std::vector<double> f(32), b(32), gp(32);
    for (int s = 0; s < kRandomFields; ++s) {
      for (int i = 0; i < 32; ++i) f[i] = counter_uniform(1000 + s, i, 0, 0);
      op.truncated(f, kNoTruncation, b);
      op.gain(f, gp);
      double bm = 0.0, gm = 0.0;
      for (int i = 0; i < 32; ++i) {
        bm = std::max(bm, std::abs(b[i]));
        gm = std::max(gm, std::abs(gp[i]));
      }
      worst = std::max(worst, bm / gm);
    }
  }
  r.pass = worst <= kDegenerateTol;
  r.detail = "max |B| / max B+ " + fmt(worst) + " <= " + fmt(kDegenerateTol);
  r.metrics = {{"relative_max", worst}};
  return r;
}

CriterionResult Suite::c5() {
  CriterionResult r{5, "arkeryd inequality", false, "", json::object()};
  double pair = 0.0, quarter = 0.0;
  for (auto kind : {KernelSpec::Kind::kPseudoMaxwellian, KernelSpec::Kind::kMollifiedHardSphere}) {
    const CollisionOperator op(CollisionKernel(static_kernel(kind)), VelocityGrid{2, 24, 4.0});
    for (int s = 0; s < kRandomFields; ++s) {
      const DistributionField f = random_block(s, 24);
      const double bmax = sup_norm(eval_gain(f, op));
      for (double K : {2.0, std::exp(1.0), 10.0}) {
        pair = std::max(pair, arkeryd_gap(f, op, K, ArkerydForm::kPairwise) / bmax);
        quarter = std::max(quarter, arkeryd_gap(f, op, K, ArkerydForm::kQuarter) / bmax);
      }
    }
  }
  r.pass = pair <= kArkerydTol;
  r.detail = "gap / sup B+ " + fmt(pair) + " <= " + fmt(kArkerydTol) + " (with the 1/4 dissipation: " + fmt(quarter) + ")";
  r.metrics = {{"pairwise", pair}, {"quarter", quarter}};
  return r;
}

CriterionResult Suite::c6() {
  CriterionResult r{6, "volume preservation", false, "", json::object()};
  const SimConfig cfg = SimConfig::standard();
  const NoiseModel nm = cfg.noise_model();
  const BrownianPath fine = BrownianPath::sample(3, 5e-4, 1000, static_cast<int>(nm.num_modes()));
  std::vector<PhasePoint> pts;
  for (int i = 0; i < 64; ++i) {
    PhasePoint p;
    p.x = {(counter_uniform(5, i, 0, 0) - 0.5) * cfg.grid.lx, (counter_uniform(5, i, 1, 0) - 0.5) * cfg.grid.lx};
    p.v = {(counter_uniform(5, i, 2, 0) - 0.5) * 4.0, (counter_uniform(5, i, 3, 0) - 0.5) * 4.0};
    pts.push_back(p);
  }
  std::vector<double> dts, rates;
  double rate_1e3 = 0.0;
  for (int factor : {8, 4, 2, 1}) {
    const BrownianPath path = fine.coarsened(factor);
    const double dt = path.dt();
    double m = 0.0;
    for (const auto& p : pts)
      for (int st = 0; st < 10; ++st)
        m = std::max(m, std::abs(jacobian_det(nm, path, st * dt, (st + 1) * dt, p) - 1.0) / dt);
    dts.push_back(dt);
    rates.push_back(m);
    if (factor == 2) rate_1e3 = m;
  }
  const double slope = loglog_slope(dts, rates);
  r.pass = rate_1e3 <= kVolumeFactor * 1e-3 && slope >= kVolumeSlope;
  r.detail = "|det J - 1| per unit time at dt=1e-3 " + fmt(rate_1e3) + " <= " + fmt(kVolumeFactor * 1e-3) + "; slope " +
             fmt2(slope) + " >= " + fmt2(kVolumeSlope);
  r.metrics = {{"dt", dts}, {"rate", rates}, {"slope", slope}};
  return r;
}

CriterionResult Suite::c7() {
  CriterionResult r{7, "transport conservation", false, "", json::object()};
  const SimConfig base = SimConfig::standard();
  const double dt = 1e-3, T = 0.5;
  const int N = 500;
  const BrownianPath path = BrownianPath::sample(11, dt, N, static_cast<int>(base.noise.size()));
  std::vector<double> hs, d1, d2;
  for (int n : {16, 24, 32}) {
    const PhaseGrid g{n, n, base.grid.lx, base.grid.vmax};
    const DistributionField f0 = base.f0.sample(g);
    const NoiseModel nm = NoiseModel::make_stream_noise(base.noise, g);
    const Trajectory tr = solve_transport(f0, {}, nm, path, T, {N});
    const DistributionField& f = tr.fields.back();
    hs.push_back(g.hv());
    d1.push_back(std::abs(l1_norm(f) / l1_norm(f0) - 1.0));
    d2.push_back(std::abs(l2_norm(f) / l2_norm(f0) - 1.0));
  }
  const double o1 = loglog_slope(hs, d1), o2 = loglog_slope(hs, d2);
  const bool p1 = d1[0] <= kTransportDrift && o1 >= kTransportOrder;
  const bool p2 = d2[0] <= kTransportDrift && o2 >= kTransportOrder;
  r.pass = p1 && p2;
  r.detail = "L1 drift " + fmt(d1[0]) + " order " + fmt2(o1) + (p1 ? " ok" : " FAIL") + "; L2 drift " + fmt(d2[0]) +
             " order " + fmt2(o2) + (p2 ? " ok" : " FAIL") + " (limits " + fmt2(kTransportDrift) + ", " +
             fmt2(kTransportOrder) + ")";
  r.metrics = {{"hv", hs}, {"l1_drift", d1}, {"l2_drift", d2}, {"l1_order", o1}, {"l2_order", o2}};
  return r;
}

CriterionResult Suite::c8() {
  CriterionResult r{8, "picard contraction", false, "", json::object()};
  const StandardRun& s = standard();
  const double bound = s.traj.lipschitz_estimate * s.traj.window_length + kRatioSlack;
  double worst = 0.0;
  int iters = 0;
  for (const auto& w : s.traj.windows) {
    worst = std::max(worst, w.max_ratio());
    iters = std::max(iters, w.iterations);
  }
  r.pass = worst <= bound && iters <= kMaxPicardIter;
  r.detail = "max ratio " + fmt(worst) + " <= " + fmt(bound) + "; max iterations " + std::to_string(iters) +
             " <= " + std::to_string(kMaxPicardIter) + " over " + std::to_string(s.traj.windows.size()) + " windows";
  json ws = json::array();
  for (const auto& w : s.traj.windows) ws.push_back({{"iterations", w.iterations}, {"max_ratio", w.max_ratio()}});
  r.metrics = {{"lipschitz", s.traj.lipschitz_estimate}, {"window", s.traj.window_length}, {"bound", bound},
               {"windows", ws}};
  return r;
}

CriterionResult Suite::c9() {
  CriterionResult r{9, "positivity floor", false, "", json::object()};
  const StandardRun& s = standard();
  const PositivityReport pr = positivity_floor_check(s.traj, s.f0, *s.op, s.model, s.path);
  const double bound = kFloorFactor * s.cfg.f0.interpolation_tolerance(s.cfg.grid) * pr.sup_f0;
  const Ladder& L = ladder();
  std::vector<double> hs, viol;
  for (const auto& l : L.levels) {
    hs.push_back(l.hv);
    viol.push_back(l.violation);
  }
  bool within = true;
  for (const auto& l : L.levels) within = within && l.violation <= l.violation_bound;
  const bool dec = non_increasing(viol) && within;
  r.pass = pr.max_violation <= bound && dec;
  r.detail = "violation " + fmt(pr.max_violation) + " <= " + fmt(bound) + "; ladder " + fmt(viol[0]) + " >= " +
             fmt(viol[1]) + " >= " + fmt(viol[2]);
  r.metrics = {{"violation", pr.max_violation}, {"bound", bound}, {"cbar", pr.cbar}, {"ladder_hv", hs},
               {"ladder_violation", viol}};
  return r;
}

CriterionResult Suite::c10() {
  CriterionResult r{10, "pathwise mass", false, "", json::object()};
  const StandardRun& s = standard();
  const double m0 = mass(s.f0);
  double drift = 0.0;
  for (const auto& f : s.traj.fields) drift = std::max(drift, std::abs(mass(f) - m0) / m0);
  const Ladder& L = ladder();
  std::vector<double> hs, d;
  for (const auto& l : L.levels) {
    hs.push_back(l.hv);
    d.push_back(l.mass_drift);
  }
  const double order = loglog_slope(hs, d);
  r.pass = drift <= kMassDrift && order >= kMassOrder;
  r.detail = "mass drift " + fmt(drift) + " <= " + fmt2(kMassDrift) + "; order " + fmt2(order) + " >= " + fmt2(kMassOrder);
  r.metrics = {{"drift", drift}, {"ladder_hv", hs}, {"ladder_drift", d}, {"order", order}};
  return r;
}

CriterionResult Suite::c11() {
  CriterionResult r{11, "momentum balance", false, "", json::object()};
  const EnsembleRun& E = ensemble();
  const int ok = static_cast<int>(E.report.paths.size()) - E.report.failures();
  const double z = ok >= 2 ? E.momentum.max_z() : std::numeric_limits<double>::infinity();
  r.pass = E.report.failures() == 0 && z <= kZMax;
  r.detail = "z " + fmt2(E.momentum.component[0].z) + ", " + fmt2(E.momentum.component[1].z) + " <= " + fmt2(kZMax) +
             " on " + std::to_string(ok) + " paths (" + std::to_string(E.report.failures()) + " failed)";
  json comps = json::array();
  for (const auto& t : E.momentum.component)
    comps.push_back({{"lhs", t.lhs}, {"rhs", t.rhs}, {"se", t.se}, {"allowance", t.allowance}, {"z", t.z}});
  r.metrics = {{"paths", ok}, {"components", comps}};
  return r;
}

CriterionResult Suite::c12() {
  CriterionResult r{12, "energy balance", false, "", json::object()};
  const EnsembleRun& E = ensemble();
  const BalanceTest& t = E.energy.identity;
  const bool id_ok = t.z <= kZMax;
  const bool ineq_ok = E.energy.paper_slack >= -kZMax * E.energy.paper_se;
  r.pass = E.report.failures() == 0 && id_ok && ineq_ok;
  r.detail = "identity z " + fmt2(t.z) + " <= " + fmt2(kZMax) + "; inequality slack " + fmt(E.energy.paper_slack) +
             " >= " + fmt(-kZMax * E.energy.paper_se);
  r.metrics = {{"lhs", t.lhs},
               {"rhs", t.rhs},
               {"se", t.se},
               {"allowance", t.allowance},
               {"z", t.z},
               {"paper_slack", E.energy.paper_slack},
               {"paper_se", E.energy.paper_se}};
  return r;
}

CriterionResult Suite::c13() {
  CriterionResult r{13, "entropy balance", false, "", json::object()};
  const StandardRun& s = standard();
  const double h0 = entropy(s.f0);
  double res = 0.0, excess = 0.0;
  for (double x : entropy_balance(s.traj).residual) res = std::max(res, std::abs(x) / std::abs(h0));
  for (const auto& f : s.traj.fields) excess = std::max(excess, (entropy(f) - h0) / std::abs(h0));
  const Ladder& L = ladder();
  std::vector<double> hs, lr;
  for (const auto& l : L.levels) {
    hs.push_back(l.hv);
    lr.push_back(l.entropy_residual);
    excess = std::max(excess, l.entropy_excess);
  }
  const EnsembleRun& E = ensemble();
  for (double x : E.entropy_excess) excess = std::max(excess, x);
  const double order = loglog_slope(hs, lr);
  r.pass = res <= kEntropyTol && order >= kEntropyOrder && excess <= kEntropyTol;
  r.detail = "residual " + fmt(res) + " <= " + fmt2(kEntropyTol) + " |H0|; order " + fmt2(order) + " >= " +
             fmt2(kEntropyOrder) + "; max H(t) - H(0) " + fmt(excess) + " |H0| over " +
             std::to_string(1 + L.levels.size() + E.entropy_excess.size()) + " paths";
  r.metrics = {{"residual", res}, {"ladder_hv", hs}, {"ladder_residual", lr}, {"order", order}, {"max_excess", excess}};
  return r;
}

CriterionResult Suite::c14() {
  CriterionResult r{14, "commutator decay", false, "", json::object()};
  const SimConfig base = SimConfig::standard();
  const PhaseGrid g{2, 128, base.grid.lx, base.grid.vmax};
  const DistributionField f0 = base.f0.sample(g);
  const NoiseModel nm = NoiseModel::make_stream_noise(base.noise, g);
  std::vector<double> eps;
  for (double m : {4.0, 6.0, 10.0, 16.0, 25.0, 40.0}) eps.push_back(m * g.hv());
  const CommutatorReport c = commutator_norms(f0, nm, eps);
  const NoiseModel cst = NoiseModel::constant_for_testing({{1.0, 0.3}});
  const CommutatorReport cs = commutator_norms(f0, cst, eps);
  DistributionField fc(g);
  for (auto& v : fc.values()) v = 0.7;
  const CommutatorReport cf = commutator_norms(fc, nm, eps);
  double zero = 0.0;
  for (const auto* rep : {&cs, &cf})
    for (std::size_t i = 0; i < eps.size(); ++i) zero = std::max({zero, rep->single_l2[i], rep->double_l1[i]});
  // Decreasing as eps shrinks: strictly increasing along the eps list.
  std::vector<double> rev(c.double_l1.rbegin(), c.double_l1.rend());
  const bool dbl = strictly_decreasing(rev);
  r.pass = c.single_slope >= kCommSlope && dbl && zero <= kCommZero;
  r.detail = "single slope " + fmt2(c.single_slope) + " >= " + fmt2(kCommSlope) + "; double " + fmt(c.double_l1.back()) +
             " -> " + fmt(c.double_l1.front()) + (dbl ? " monotone" : " not monotone") + "; constant cases " +
             fmt(zero) + " <= " + fmt(kCommZero);
  r.metrics = {{"eps", eps}, {"single_l2", c.single_l2}, {"double_l1", c.double_l1}, {"single_slope", c.single_slope},
               {"double_slope", c.double_slope}, {"constant_max", zero}};
  return r;
}

CriterionResult Suite::c15() {
  CriterionResult r{15, "truncation gap", false, "", json::object()};
  const PhaseGrid g{2, 16, 2.0 * kPi, 4.0};
  const std::vector<double> ms = {1.0, 4.0, 16.0, 64.0};
  bool holds = true, mono = true;
  double worst_ratio = 0.0;
  json gaps = json::array();
  for (int s = 0; s < kRandomFields; ++s) {
    DistributionField f(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double u = counter_uniform(2000 + s, i, 0, 0);
      f[i] = 10.0 * u * u * u;
    }
    std::vector<double> lhs;
    for (double m : ms) {
      const GapBound b = renorm_gap_bound(f, m);
      holds = holds && b.holds();
      worst_ratio = std::max(worst_ratio, b.lhs / b.rhs);
      lhs.push_back(b.lhs);
    }
    mono = mono && strictly_decreasing(lhs);
    gaps.push_back(lhs);
  }
  r.pass = holds && mono;
  r.detail = std::string("bound ") + (holds ? "holds" : "violated") + " (max lhs/rhs " + fmt(worst_ratio) + "); gap " +
             (mono ? "monotone" : "not monotone") + " in m";
  r.metrics = {{"m", ms}, {"gaps", gaps}, {"max_ratio", worst_ratio}};
  return r;
}

CriterionResult Suite::c16() {
  CriterionResult r{16, "weak-form residual", false, "", json::object()};
  const Ladder& L = ladder();
  std::vector<double> hs;
  for (const auto& l : L.levels) hs.push_back(l.hv);
  std::vector<double> slopes;
  double worst = std::numeric_limits<double>::infinity();
  std::string worst_label;
  for (std::size_t k = 0; k < L.weak_labels.size(); ++k) {
    std::vector<double> ys;
    for (const auto& l : L.levels) ys.push_back(l.weak[k]);
    const double s = loglog_slope(hs, ys);
    slopes.push_back(s);
    if (s < worst) {
      worst = s;
      worst_label = L.weak_labels[k];
    }
  }
  r.pass = worst >= kWeakOrder;
  r.detail = "min slope " + fmt2(worst) + " (" + worst_label + ") >= " + fmt2(kWeakOrder) + " over " +
             std::to_string(slopes.size()) + " cases";
  r.metrics = {{"labels", L.weak_labels}, {"slopes", slopes}};
  return r;
}

CriterionResult Suite::c17() {
  CriterionResult r{17, "velocity averaging", false, "", json::object()};
  const SimConfig base = SimConfig::coarse();
  const double T = 0.12;
  const int paths = 16;
  const int K = static_cast<int>(base.noise.size());
  // Smooth velocity weight supported in |v| < 2.
  auto phi = [](const Vec2& v) {
    const double s2 = dot(v, v) / 4.0;
    return s2 >= 1.0 ? 0.0 : std::exp(1.0 - 1.0 / (1.0 - s2));
  };
  const int levels[2][3] = {{4, 12, 50}, {8, 24, 100}};
  std::vector<double> mean_ratio(2, 0.0);
  bool finite = true;
  double parseval = 0.0;
  json per = json::array();
  for (int li = 0; li < 2; ++li) {
    SimConfig cfg = base;
    cfg.grid = PhaseGrid{levels[li][0], levels[li][1], base.grid.lx, base.grid.vmax};
    const NoiseModel nm = cfg.noise_model();
    const CollisionKernel kernel(cfg.kernel);
    const CollisionOperator op(kernel, VelocityGrid{2, cfg.grid.nv, cfg.grid.vmax});
    const DistributionField f0 = cfg.f0.sample(cfg.grid);
    PicardOptions po = cfg.picard;
    po.compute_dissipation = false;
    std::vector<double> ratios;
    for (int i = 0; i < paths; ++i) {
      const double dt0 = 1.0 / levels[0][2];
      BrownianPath path = BrownianPath::sample(derive_seed(opts_.seed, 1700 + i), dt0,
                                               static_cast<int>(std::lround(T / dt0)), K);
      if (li == 1) path = path.refined(1);
      const Trajectory tr = picard_solve(f0, op, cfg.n, nm, path, T, po);
      const std::size_t N = tr.drivers.size();
      std::vector<std::vector<double>> rho;
      std::vector<const DistributionField*> fs;
      std::vector<const std::vector<double>*> gs;
      for (std::size_t j = 0; j < N; ++j) {
        rho.push_back(velocity_average(tr.fields[j], phi));
        fs.push_back(&tr.fields[j]);
        gs.push_back(&tr.drivers[j]);
      }
      const H16Estimate e = h16_estimate(cfg.grid, rho, path.dt(), fs, gs, f0);
      finite = finite && std::isfinite(e.ratio()) && e.rhs > 0.0;
      ratios.push_back(e.ratio());
      const double unit = h16_lhs(cfg.grid, rho, path.dt(), true);
      double direct = 0.0;
      for (const auto& rr : rho)
        for (double x : rr) direct += path.dt() * x * x * cfg.grid.hx() * cfg.grid.hx();
      parseval = std::max(parseval, std::abs(unit - direct) / direct);
    }
    mean_ratio[li] = mean_se(ratios).mean;
    per.push_back(ratios);
  }
  const double change = mean_ratio[1] / mean_ratio[0] - 1.0;
  r.pass = finite && std::abs(change) <= kVaStability && parseval <= kParsevalTol;
  r.detail = "mean ratio " + fmt(mean_ratio[0]) + " -> " + fmt(mean_ratio[1]) + " (change " + fmt2(100.0 * change) +
             "%, limit 50%); Parseval " + fmt(parseval) + " <= " + fmt(kParsevalTol);
  r.metrics = {{"mean_ratio", mean_ratio}, {"ratios", per}, {"parseval", parseval}};
  return r;
}

CriterionResult Suite::run(int id) {
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    switch (id) {
      case 1: r = c1(); break;
      case 2: r = c2(); break;
      case 3: r = c3(); break;
      case 4: r = c4(); break;
      case 5: r = c5(); break;
      case 6: r = c6(); break;
      case 7: r = c7(); break;
      case 8: r = c8(); break;
      case 9: r = c9(); break;
      case 10: r = c10(); break;
      case 11: r = c11(); break;
      case 12: r = c12(); break;
      case 13: r = c13(); break;
      case 14: r = c14(); break;
      case 15: r = c15(); break;
      case 16: r = c16(); break;
      case 17: r = c17(); break;
      default: throw ValidationError("unknown criterion " + std::to_string(id));
    }
  } catch (const std::exception& e) {
    r.id = id;
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
    r.metrics = {{"exception", e.what()}};
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

void print_line(std::ostream& out, const CriterionResult& r) {
  char head[64];
  std::snprintf(head, sizeof head, "%s %2d %s: ", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str());
  out << head << r.detail << std::endl;
}

std::vector<CriterionResult> run_pass(const AcceptanceOptions& opts, const std::vector<int>& ids, const std::string& dir,
                                      std::ostream* out) {
  fs::create_directories(dir);
  Suite suite(opts, dir);
  std::vector<CriterionResult> res;
  json j = json::array(), timing = json::object();
  for (int id : ids) {
    res.push_back(suite.run(id));
    if (out != nullptr) print_line(*out, res.back());
    j.push_back({{"id", res.back().id},
                 {"name", res.back().name},
                 {"pass", res.back().pass},
                 {"detail", res.back().detail},
                 {"metrics", res.back().metrics}});
    timing[std::to_string(id)] = res.back().seconds;
  }
  std::ofstream(dir + "/acceptance.json") << json{{"schema", "kspde.acceptance/1"}, {"criteria", j}}.dump(2) << "\n";
  std::ofstream(dir + "/timing.json") << timing.dump(2) << "\n";
  return res;
}

}  // namespace

std::vector<std::string> compare_trees(const std::string& a, const std::string& b) {
  auto list = [](const std::string& root) {
    std::set<std::string> files;
    if (!fs::exists(root)) return files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (!e.is_regular_file() || e.path().filename() == "timing.json") continue;
      files.insert(fs::relative(e.path(), root).generic_string());
    }
    return files;
  };
  auto read = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
  };
  const auto fa = list(a), fb = list(b);
  std::vector<std::string> diff;
  for (const auto& f : fa) {
    if (!fb.count(f) || read(fs::path(a) / f) != read(fs::path(b) / f)) diff.push_back(f);
  }
  for (const auto& f : fb)
    if (!fa.count(f)) diff.push_back(f);
  return diff;
}

AcceptanceReport run_acceptance(const AcceptanceOptions& opts, std::ostream& out) {
  std::vector<int> ids = opts.only;
  if (ids.empty())
    for (int i = 1; i <= 17; ++i) ids.push_back(i);
  const std::string run1 = opts.out_dir + "/run1", run2 = opts.out_dir + "/run2";
  fs::remove_all(run1);
  fs::remove_all(run2);

  AcceptanceReport rep;
  rep.results = run_pass(opts, ids, run1, &out);

  if (opts.determinism && opts.only.empty()) {
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r{18, "determinism", false, "", json::object()};
    const auto second = run_pass(opts, ids, run2, nullptr);
    const auto diff = compare_trees(run1, run2);
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(run1))
      if (e.is_regular_file() && e.path().filename() != "timing.json") ++files;
    bool same_verdicts = second.size() == rep.results.size();
    for (std::size_t i = 0; same_verdicts && i < second.size(); ++i)
      same_verdicts = second[i].pass == rep.results[i].pass;
    r.pass = diff.empty() && same_verdicts && files > 0;
    r.detail = std::to_string(files) + " artifact files compared, " + std::to_string(diff.size()) + " differ" +
               (diff.empty() ? "" : " (first: " + diff.front() + ")");
    r.metrics = {{"files", files}, {"differ", diff}};
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    print_line(out, r);
    rep.results.push_back(r);
  }

  json summary = json::array();
  for (const auto& r : rep.results) summary.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
  std::ofstream(opts.out_dir + "/summary.json") << json{{"schema", "kspde.acceptance/1"},
                                                        {"passed", rep.passed()},
                                                        {"evaluated", rep.results.size()},
                                                        {"criteria", summary}}
                                                       .dump(2)
                                                << "\n";
  out << "acceptance: " << rep.results.size() << " criteria evaluated, " << rep.passed() << " passed" << std::endl;
  return rep;
}

}  // namespace kspde
