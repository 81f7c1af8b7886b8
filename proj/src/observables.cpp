#include "kspde/observables.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace kspde {

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}
bool all_finite(const std::vector<Vec2>& v) {
  return std::all_of(v.begin(), v.end(), [](const Vec2& x) { return std::isfinite(x[0]) && std::isfinite(x[1]); });
}

double weighted_log_moment(const DistributionField& f) {
  const PhaseGrid& g = f.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double val = f[i];
    if (val == 0.0) continue;
    const PhasePoint p = g.node(i);
    const double lg = val > 0.0 ? std::abs(std::log(val)) : 0.0;
    acc += (1.0 + dot(p.x, p.x) + dot(p.v, p.v) + lg) * std::abs(val);
  }
  return acc * g.cell_volume();
}

std::vector<double> cumulative_dissipation(const Trajectory& traj) {
  std::vector<double> cum(traj.size(), 0.0);
  if (traj.dissipation.size() != traj.size()) return cum;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const double dt = traj.time(k) - traj.time(k - 1);
    cum[k] = cum[k - 1] + 0.5 * dt * (traj.dissipation[k - 1] + traj.dissipation[k]);
  }
  return cum;
}

bool every_step(const Trajectory& traj) {
  for (std::size_t k = 0; k < traj.size(); ++k)
    if (traj.steps[k] != static_cast<int>(k)) return false;
  return true;
}

}  // namespace

bool BalanceReport::finite() const {
  return all_finite(mass) && all_finite(momentum) && all_finite(energy) && all_finite(weighted_moment) &&
         all_finite(weighted_log_moment) && all_finite(entropy) && all_finite(cum_dissipation) &&
         all_finite(momentum_drift) && all_finite(energy_drift) && all_finite(energy_drift_paper) &&
         all_finite(momentum_martingale) && all_finite(energy_martingale) && all_finite(collision_mass) &&
         all_finite(collision_momentum) && all_finite(collision_energy) && all_finite(mass_residual) &&
         all_finite(momentum_residual) && all_finite(energy_residual) && all_finite(entropy_residual);
}

BalanceReport balance_report(const Trajectory& traj, const NoiseModel& model, const BrownianPath& path) {
  BalanceReport r;
  const std::size_t S = traj.size();
  for (std::size_t k = 0; k < S; ++k) {
    const DistributionField& f = traj.fields[k];
    r.t.push_back(traj.time(k));
    r.mass.push_back(mass(f));
    r.momentum.push_back(momentum(f));
    r.energy.push_back(kinetic_energy(f));
    r.weighted_moment.push_back(confinement_moment(f));
    r.weighted_log_moment.push_back(weighted_log_moment(f));
    r.entropy.push_back(entropy(f));
  }
  r.cum_dissipation = cumulative_dissipation(traj);
  for (std::size_t k = 0; k < S; ++k) {
    r.mass_residual.push_back(r.mass[k] - r.mass[0]);
    r.entropy_residual.push_back(r.entropy[k] + r.cum_dissipation[k] - r.entropy[0]);
  }
  if (S == 0 || !every_step(traj)) return r;

  const PhaseGrid& g = traj.grid;
  const std::size_t N = g.size();
  const std::size_t K = model.num_modes();
  // Per-node coefficients.
  std::vector<Vec2> hdrift(N);
  std::vector<double> edrift(N);
  std::vector<Vec2> sig(N * K);
  for (std::size_t i = 0; i < N; ++i) {
    const PhasePoint p = g.node(i);
    hdrift[i] = model.ito_drift(p.x, p.v);
    edrift[i] = model.energy_drift_density(p.x, p.v);
    for (std::size_t k = 0; k < K; ++k) sig[i * K + k] = model.sigma(k, p.x, p.v);
  }
  const double dv = g.cell_volume();
  const double dt = traj.dt;
  Vec2 md{0, 0}, mm{0, 0}, cm{0, 0};
  double ed = 0, edp = 0, em = 0, cmass = 0, ce = 0;
  for (std::size_t s = 0; s < S; ++s) {
    r.momentum_drift.push_back(md);
    r.energy_drift.push_back(ed);
    r.energy_drift_paper.push_back(edp);
    r.momentum_martingale.push_back(mm);
    r.energy_martingale.push_back(em);
    r.collision_mass.push_back(cmass);
    r.collision_momentum.push_back(cm);
    r.collision_energy.push_back(ce);
    if (s + 1 == S) break;
    const std::vector<double>& f = traj.fields[s].values();
    const std::vector<double>* gd = s < traj.drivers.size() ? &traj.drivers[s] : nullptr;
    const double* db = path.step(static_cast<int>(s));
    Vec2 a_md{0, 0}, a_mm{0, 0}, a_cm{0, 0};
    double a_ed = 0, a_em = 0, a_cmass = 0, a_ce = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const PhasePoint p = g.node(i);
      const double fi = f[i];
      if (gd != nullptr && !gd->empty()) {
        const double gi = (*gd)[i];
        a_cmass += gi;
        a_cm[0] += gi * p.v[0];
        a_cm[1] += gi * p.v[1];
        a_ce += gi * 0.5 * dot(p.v, p.v);
      }
      if (fi == 0.0) continue;
      a_md[0] += fi * hdrift[i][0];
      a_md[1] += fi * hdrift[i][1];
      a_ed += fi * edrift[i];
      for (std::size_t k = 0; k < K; ++k) {
        const Vec2& sk = sig[i * K + k];
        a_mm[0] += fi * sk[0] * db[k];
        a_mm[1] += fi * sk[1] * db[k];
        a_em += fi * dot(p.v, sk) * db[k];
      }
    }
    for (int c = 0; c < 2; ++c) {
      md[c] += dt * dv * a_md[c];
      mm[c] += dv * a_mm[c];
      cm[c] += dt * dv * a_cm[c];
    }
    ed += 0.5 * dt * dv * a_ed;
    edp += dt * dv * a_ed;
    em += dv * a_em;
    cmass += dt * dv * a_cmass;
    ce += dt * dv * a_ce;
  }
  for (std::size_t k = 0; k < S; ++k) {
    Vec2 res;
    for (int c = 0; c < 2; ++c)
      res[c] = r.momentum[k][c] - r.momentum[0][c] - r.momentum_drift[k][c] - r.momentum_martingale[k][c];
    r.momentum_residual.push_back(res);
    r.energy_residual.push_back(r.energy[k] - r.energy[0] - r.energy_drift[k] - r.energy_martingale[k]);
  }
  return r;
}

std::vector<double> mass_balance(const Trajectory& traj) {
  std::vector<double> out;
  if (traj.size() == 0) return out;
  const double m0 = mass(traj.fields[0]);
  for (const auto& f : traj.fields) out.push_back(mass(f) - m0);
  return out;
}

EntropyBalance entropy_balance(const Trajectory& traj) {
  EntropyBalance b;
  if (traj.size() == 0) return b;
  const std::vector<double> cum = cumulative_dissipation(traj);
  const double h0 = entropy(traj.fields[0]);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double r = entropy(traj.fields[k]) + cum[k] - h0;
    b.residual.push_back(r);
    b.slack.push_back(-r);
  }
  return b;
}

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe m;
  const std::size_t n = xs.size();
  if (n == 0) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(n);
  if (n < 2) return m;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  return m;
}

namespace {

void check_ensemble(const std::vector<BalanceReport>& ens) {
  if (ens.size() < 2) throw ValidationError("ensemble balance needs at least 2 paths");
  for (const auto& r : ens) {
    if (!r.has_integrals() || r.t.empty()) throw ValidationError("ensemble balance needs every step stored");
  }
}

BalanceTest make_test(const std::vector<double>& lhs, const std::vector<double>& rhs, double allowance) {
  BalanceTest t;
  std::vector<double> d(lhs.size());
  for (std::size_t i = 0; i < lhs.size(); ++i) d[i] = lhs[i] - rhs[i];
  t.lhs = mean_se(lhs).mean;
  t.rhs = mean_se(rhs).mean;
  t.se = mean_se(d).se;
  t.allowance = allowance;
  const double denom = t.se + allowance;
  const double gap = std::abs(t.lhs - t.rhs);
  t.z = denom > 0.0 ? gap / denom : (gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  return t;
}

}  // namespace

MomentumBalance momentum_balance(const std::vector<BalanceReport>& ens, const Vec2& allowance) {
  check_ensemble(ens);
  MomentumBalance b;
  for (int c = 0; c < 2; ++c) {
    std::vector<double> lhs, rhs;
    for (const auto& r : ens) {
      lhs.push_back(r.momentum.back()[c]);
      rhs.push_back(r.momentum.front()[c] + r.momentum_drift.back()[c]);
    }
    b.component[c] = make_test(lhs, rhs, allowance[c]);
  }
  return b;
}

EnergyBalance energy_balance(const std::vector<BalanceReport>& ens, double allowance, const std::vector<double>& bias) {
  check_ensemble(ens);
  if (!bias.empty() && bias.size() != ens.size()) throw ValidationError("energy_balance: one bias per path expected");
  EnergyBalance b;
  std::vector<double> lhs, rhs, slack;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const BalanceReport& r = ens[i];
    const double b = bias.empty() ? 0.0 : bias[i];
    lhs.push_back(r.energy.back());
    rhs.push_back(r.energy.front() + r.energy_drift.back());
    slack.push_back(r.energy.front() + r.energy_drift_paper.back() - (r.energy.back() - b));
  }
  b.identity = make_test(lhs, rhs, allowance);
  const MeanSe s = mean_se(slack);
  b.paper_slack = s.mean;
  b.paper_se = s.se;
  return b;
}

InterpolationBias interpolation_bias(const InitialCondition& ic, const PhaseGrid& grid, const NoiseModel& model,
                                     const BrownianPath& path, double t) {
  const DistributionField f0 = ic.sample(grid);
  const FlowMap fm = compute_flow_map(grid, model, path, 0.0, t, true);
  InterpolationBias b;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const PhasePoint& q = fm.images[i];
    const bool out = std::abs(q.v[0]) > grid.vmax || std::abs(q.v[1]) > grid.vmax;
    const double d = interpolate(f0, q) - (out ? 0.0 : ic.eval(q.x, q.v, grid.lx));
    if (d == 0.0) continue;
    const PhasePoint p = grid.node(i);
    b.mass += d;
    b.momentum[0] += d * p.v[0];
    b.momentum[1] += d * p.v[1];
    b.energy += d * 0.5 * dot(p.v, p.v);
  }
  const double dv = grid.cell_volume();
  b.mass *= dv;
  b.momentum = {b.momentum[0] * dv, b.momentum[1] * dv};
  b.energy *= dv;
  return b;
}

std::vector<MomentEstimate> moment_bound_series(const std::vector<const Trajectory*>& paths, const std::vector<double>& ps) {
  std::vector<double> sup_w, sup_nb;
  for (const Trajectory* tr : paths) {
    double w = 0.0, nb = 0.0;
    for (const auto& f : tr->fields) {
      w = std::max(w, weighted_log_moment(f));
      nb = std::max(nb, entropy_pm(f).negative_bound);
    }
    sup_w.push_back(w);
    sup_nb.push_back(nb);
  }
  std::vector<MomentEstimate> out;
  for (double p : ps) {
    std::vector<double> a, b;
    for (std::size_t i = 0; i < sup_w.size(); ++i) {
      a.push_back(std::pow(sup_w[i], p));
      b.push_back(std::pow(sup_nb[i], p));
    }
    MomentEstimate m;
    m.p = p;
    const MeanSe ma = mean_se(a);
    m.estimate = ma.mean;
    m.se = ma.se;
    m.negative_bound = mean_se(b).mean;
    out.push_back(m);
  }
  return out;
}

void write_balance_csv(const std::string& file, const BalanceReport& r) {
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot open " + file + " for writing");
  os << "t,mass,px,py,energy,weighted_moment,entropy,cum_dissipation,residual_mass,residual_px,residual_py,"
        "residual_energy,residual_entropy\n";
  os << std::setprecision(17);
  for (std::size_t k = 0; k < r.t.size(); ++k) {
    const bool full = r.has_integrals();
    os << r.t[k] << ',' << r.mass[k] << ',' << r.momentum[k][0] << ',' << r.momentum[k][1] << ',' << r.energy[k] << ','
       << r.weighted_moment[k] << ',' << r.entropy[k] << ',' << r.cum_dissipation[k] << ',' << r.mass_residual[k] << ',';
    if (full) {
      os << r.momentum_residual[k][0] << ',' << r.momentum_residual[k][1] << ',' << r.energy_residual[k];
    } else {
      os << ",,";
    }
    os << ',' << r.entropy_residual[k] << '\n';
  }
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return 0.0;
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace kspde
