#include "kspde/renorm_va.hpp"

#include "kspde/observables.hpp"

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <mutex>

namespace kspde {

double gamma_m(double z, double m) { return z / (1.0 + z / m); }

double gamma_m_prime(double z, double m) {
  const double d = 1.0 + z / m;
  return 1.0 / (d * d);
}

double gamma_m_small(double z, double m) { return z * gamma_m_prime(z, m); }

Renormalization Renormalization::identity() { return Renormalization{}; }

Renormalization Renormalization::gamma(double m) {
  if (!(m >= 1.0)) throw ValidationError("Gamma_m needs m >= 1");
  Renormalization r;
  r.kind_ = Kind::kGammaM;
  r.param_ = m;
  r.name_ = "gamma_" + std::to_string(static_cast<long long>(m));
  return r;
}

Renormalization Renormalization::beta(double delta) {
  if (!(delta > 0.0)) throw ValidationError("beta_delta needs delta > 0");
  Renormalization r;
  r.kind_ = Kind::kBetaDelta;
  r.param_ = delta;
  r.name_ = "beta_" + std::to_string(delta);
  return r;
}

Renormalization Renormalization::log1p() {
  Renormalization r;
  r.kind_ = Kind::kLog1p;
  r.name_ = "log1p";
  return r;
}

Renormalization Renormalization::custom(std::string name, std::function<double(double)> g,
                                        std::function<double(double)> dg, std::function<double(double)> d2g) {
  Renormalization r;
  r.kind_ = Kind::kCustom;
  r.name_ = std::move(name);
  r.g_ = std::move(g);
  r.dg_ = std::move(dg);
  r.d2g_ = std::move(d2g);
  return r;
}

double Renormalization::value(double z) const {
  switch (kind_) {
    case Kind::kIdentity: return z;
    case Kind::kGammaM: return gamma_m(z, param_);
    case Kind::kBetaDelta: return std::log1p(param_ * z) / param_;
    case Kind::kLog1p: return std::log1p(z);
    case Kind::kCustom: return g_(z);
  }
  return 0.0;
}

double Renormalization::deriv(double z) const {
  switch (kind_) {
    case Kind::kIdentity: return 1.0;
    case Kind::kGammaM: return gamma_m_prime(z, param_);
    case Kind::kBetaDelta: return 1.0 / (1.0 + param_ * z);
    case Kind::kLog1p: return 1.0 / (1.0 + z);
    case Kind::kCustom: return dg_(z);
  }
  return 0.0;
}

double Renormalization::second(double z) const {
  switch (kind_) {
    case Kind::kIdentity: return 0.0;
    case Kind::kGammaM: {
      const double d = 1.0 + z / param_;
      return -2.0 / (param_ * d * d * d);
    }
    case Kind::kBetaDelta: {
      const double d = 1.0 + param_ * z;
      return -param_ / (d * d);
    }
    case Kind::kLog1p: return -1.0 / ((1.0 + z) * (1.0 + z));
    case Kind::kCustom: return d2g_(z);
  }
  return 0.0;
}

double Renormalization::admissibility_sup() const {
  double s = 0.0;
  for (int i = 0; i <= 1200; ++i) {
    const double z = (i == 0) ? 0.0 : std::pow(10.0, -4.0 + 12.0 * i / 1200.0);
    s = std::max(s, (1.0 + z) * std::abs(deriv(z)));
  }
  return s;
}

GapBound renorm_gap_bound(const DistributionField& f, double m) {
  GapBound g;
  const double sm = std::sqrt(m);
  double l1 = 0.0, big = 0.0, gap = 0.0;
  for (double v : f.values()) {
    if (v < 0.0) throw ValidationError("renorm_gap_bound: f must be nonnegative");
    l1 += v;
    if (v >= sm) big += v;
    gap += v - gamma_m(v, m);
  }
  const double dv = f.grid().cell_volume();
  g.lhs = gap * dv;
  g.rhs = (l1 / sm + big) * dv;
  return g;
}

// ---------------------------------------------------------------------------

TestFunction::Jet TestFunction::jet(const Vec2& x, const Vec2& v, double lx) const {
  Jet j;
  const Vec2 d{v[0] - center[0], v[1] - center[1]};
  const double r2 = radius * radius;
  const double q = dot(d, d) / r2;
  if (q >= 1.0) return j;
  const double s = 1.0 / (1.0 - q);
  const double B = std::exp(1.0 - s);
  const double B1 = -B * s * s;                         // dB/dq
  const double B2 = B * (s * s * s * s - 2.0 * s * s * s);  // d2B/dq2
  const double w = 2.0 * kPi / lx;
  const double arg = w * (k[0] * x[0] + k[1] * x[1]) + phase;
  const double c = std::cos(arg), sn = std::sin(arg);
  const Vec2 dq{2.0 * d[0] / r2, 2.0 * d[1] / r2};
  j.value = c * B;
  j.grad_x = {-sn * w * k[0] * B, -sn * w * k[1] * B};
  j.grad_v = {c * B1 * dq[0], c * B1 * dq[1]};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) j.hess_v[a][b] = c * (B2 * dq[a] * dq[b] + (a == b ? B1 * 2.0 / r2 : 0.0));
  return j;
}

void validate_test_function(const TestFunction& phi, const PhaseGrid& grid) {
  const double limit = grid.vmax - 2.0 * grid.hv();
  for (int a = 0; a < 2; ++a) {
    if (std::abs(phi.center[a]) + phi.radius > limit + 1e-12) {
      throw ValidationError("test function support reaches the velocity collar (|c| + r > vmax - 2 hv)");
    }
  }
  if (!(phi.radius > 0.0)) throw ValidationError("test function radius must be positive");
}

std::vector<double> weak_residual(const Trajectory& traj, const Renormalization& gamma, const TestFunction& phi,
                                  const CollisionOperator* op, double n, const NoiseModel& model,
                                  const BrownianPath& path, const WeakResidualOptions& opts) {
  const PhaseGrid& g = traj.grid;
  validate_test_function(phi, g);
  const std::size_t S = traj.size();
  for (std::size_t k = 0; k < S; ++k) {
    if (traj.steps[k] != static_cast<int>(k)) throw ValidationError("weak_residual: trajectory must hold every step");
  }
  if (S == 0) return {};
  const std::size_t N = g.size();
  const std::size_t K = model.num_modes();
  // Per-node test-function data.
  std::vector<double> val(N), adv(N), gen(N), noise(N * K);
  for (std::size_t i = 0; i < N; ++i) {
    const PhasePoint p = g.node(i);
    const TestFunction::Jet j = phi.jet(p.x, p.v, g.lx);
    val[i] = j.value;
    adv[i] = dot(p.v, j.grad_x);
    gen[i] = (j.value == 0.0 && j.grad_v[0] == 0.0 && j.grad_v[1] == 0.0) ? 0.0
                                                                           : model.generator(p.x, p.v, j.grad_v, j.hess_v);
    for (std::size_t k = 0; k < K; ++k) noise[i * K + k] = dot(model.sigma(k, p.x, p.v), j.grad_v);
  }
  const double dv = g.cell_volume();
  const double dt = traj.dt;
  std::vector<double> res(S, 0.0);
  double integral = 0.0;
  double pair0 = 0.0;
  std::vector<double> drv;
  for (std::size_t s = 0; s < S; ++s) {
    const std::vector<double>& f = traj.fields[s].values();
    double pair = 0.0;
    for (std::size_t i = 0; i < N; ++i) pair += gamma.value(f[i]) * val[i];
    pair *= dv;
    if (s == 0) pair0 = pair;
    res[s] = pair - pair0 - integral;
    if (s + 1 == S) break;
    // Increment of the right-hand side over [t_s, t_{s+1}].
    const std::vector<double>* gsrc = nullptr;
    if (s < traj.drivers.size() && !traj.drivers[s].empty()) {
      gsrc = &traj.drivers[s];
    } else if (op != nullptr) {
      drv = eval_truncated(traj.fields[s], *op, n).values();
      gsrc = &drv;
    }
    const double* db = path.step(static_cast<int>(s));
    double a = 0.0, b = 0.0, c = 0.0, st = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double G = gamma.value(f[i]);
      a += G * adv[i];
      c += G * gen[i];
      if (gsrc != nullptr) b += gamma.deriv(f[i]) * (*gsrc)[i] * val[i];
      double sn = 0.0;
      for (std::size_t k = 0; k < K; ++k) sn += noise[i * K + k] * db[k];
      st += G * sn;
    }
    integral += dv * (dt * (a + b + opts.ito_coefficient * c) + st);
  }
  return res;
}

// ---------------------------------------------------------------------------

namespace {

double bump1(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - s * s));
}

double bump1_norm() {
  static const double c = [] {
    const int n = 200000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += bump1(-1.0 + (i + 0.5) * 2.0 / n);
    return 1.0 / (acc * 2.0 / n);
  }();
  return c;
}

/// Normalized 1-D mollifier at s (unit radius).
double mollifier1(double s) { return std::abs(s) >= 1.0 ? 0.0 : bump1_norm() * bump1(s); }

}  // namespace

CommutatorReport commutator_norms(const DistributionField& f, const NoiseModel& model, const std::vector<double>& eps) {
  const PhaseGrid& g = f.grid();
  const double h = g.hv();
  const int nv = g.nv;
  CommutatorReport rep;
  rep.eps = eps;
  if (eps.empty()) return rep;
  double emax = 0.0;
  for (double e : eps) {
    if (e < 2.0 * h) throw ValidationError("commutator_norms: eps below resolvable width 2 hv");
    emax = std::max(emax, e);
  }
  const int P = static_cast<int>(std::ceil(emax / h)) + 3;
  const int M = nv + 2 * P;
  const std::size_t MM = static_cast<std::size_t>(M) * M;
  const std::size_t K = model.num_modes();
  auto at = [M](int i, int j) { return static_cast<std::size_t>(i) * M + j; };
  auto coord = [&](int i) { return -g.vmax + (i - P + 0.5) * h; };

  rep.single_l2.assign(eps.size(), 0.0);
  rep.double_l1.assign(eps.size(), 0.0);
  const double dvol = g.cell_volume();

  std::vector<double> F(MM), tmp(MM);
  std::vector<Vec2> sig(MM);
  // X u = sigma . D u with central differences; zero on the outer ring.
  auto apply_x = [&](const std::vector<double>& src, std::vector<double>& dst) {
    dst.assign(MM, 0.0);
    for (int i = 1; i < M - 1; ++i)
      for (int j = 1; j < M - 1; ++j) {
        const double d1 = (src[at(i + 1, j)] - src[at(i - 1, j)]) / (2.0 * h);
        const double d2 = (src[at(i, j + 1)] - src[at(i, j - 1)]) / (2.0 * h);
        dst[at(i, j)] = sig[at(i, j)][0] * d1 + sig[at(i, j)][1] * d2;
      }
  };
  // Separable discrete mollification; valid where the stencil fits.
  auto convolve = [&](const std::vector<double>& w, const std::vector<double>& src, std::vector<double>& dst) {
    const int r = static_cast<int>(w.size() / 2);
    tmp.assign(MM, 0.0);
    dst.assign(MM, 0.0);
    for (int i = 0; i < M; ++i)
      for (int j = r; j < M - r; ++j) {
        double acc = 0.0;
        for (int b = -r; b <= r; ++b) acc += w[b + r] * src[at(i, j - b)];
        tmp[at(i, j)] = acc;
      }
    for (int i = r; i < M - r; ++i)
      for (int j = r; j < M - r; ++j) {
        double acc = 0.0;
        for (int a = -r; a <= r; ++a) acc += w[a + r] * tmp[at(i - a, j)];
        dst[at(i, j)] = acc;
      }
  };

  std::vector<double> xf, xxf, ef, a1, a2, a3, b1;
  for (std::size_t ix = 0; ix < g.num_x(); ++ix) {
    const Vec2 x{g.x_node(static_cast<int>(ix / g.nx)), g.x_node(static_cast<int>(ix % g.nx))};
    const auto blk = f.block(ix);
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < M; ++j) {
        const int ci = std::clamp(i - P, 0, nv - 1), cj = std::clamp(j - P, 0, nv - 1);
        F[at(i, j)] = blk[static_cast<std::size_t>(ci) * nv + cj];
      }
    for (std::size_t k = 0; k < K; ++k) {
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) sig[at(i, j)] = model.sigma(k, x, Vec2{coord(i), coord(j)});
      apply_x(F, xf);
      apply_x(xf, xxf);
      for (std::size_t e = 0; e < eps.size(); ++e) {
        const int r = static_cast<int>(std::ceil(eps[e] / h));
        std::vector<double> w(2 * r + 1);
        double ws = 0.0;
        for (int a = -r; a <= r; ++a) {
          w[a + r] = mollifier1(a * h / eps[e]);
          ws += w[a + r];
        }
        for (double& v : w) v /= ws;
        convolve(w, F, ef);
        convolve(w, xf, a1);   // eta X f
        apply_x(ef, a2);       // X eta f
        convolve(w, xxf, a3);  // eta X X f
        apply_x(a1, b1);       // X eta X f
        apply_x(a2, ef);       // X X eta f (reuses ef)
        double l2 = 0.0, l1 = 0.0;
        for (int i = P; i < P + nv; ++i)
          for (int j = P; j < P + nv; ++j) {
            const std::size_t z = at(i, j);
            const double c = a1[z] - a2[z];
            l2 += c * c;
            l1 += std::abs(a3[z] - 2.0 * b1[z] + ef[z]);
          }
        rep.single_l2[e] += l2 * dvol;
        rep.double_l1[e] += l1 * dvol;
      }
    }
  }
  for (double& v : rep.single_l2) v = std::sqrt(v);
  rep.single_slope = loglog_slope(rep.eps, rep.single_l2);
  rep.double_slope = loglog_slope(rep.eps, rep.double_l1);
  return rep;
}

// ---------------------------------------------------------------------------

std::vector<double> velocity_average(const DistributionField& f, const std::function<double(const Vec2&)>& phi) {
  const PhaseGrid& g = f.grid();
  std::vector<double> w(g.block());
  for (int j1 = 0; j1 < g.nv; ++j1)
    for (int j2 = 0; j2 < g.nv; ++j2) w[static_cast<std::size_t>(j1) * g.nv + j2] = phi(Vec2{g.v_node(j1), g.v_node(j2)});
  std::vector<double> rho(g.num_x(), 0.0);
  for (std::size_t ix = 0; ix < g.num_x(); ++ix) {
    const auto b = f.block(ix);
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += b[i] * w[i];
    rho[ix] = acc * g.velocity_cell();
  }
  return rho;
}

double h16_lhs(const PhaseGrid& grid, const std::vector<std::vector<double>>& rho, double dt, bool unit_weight) {
  static std::mutex planner_mutex;
  const int n = grid.nx;
  const std::size_t N = static_cast<std::size_t>(n) * n;
  fftw_complex* buf = fftw_alloc_complex(N);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex);
    plan = fftw_plan_dft_2d(n, n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  std::vector<double> weight(N);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const int ka = a <= n / 2 ? a : a - n, kb = b <= n / 2 ? b : b - n;
      const double xi = 2.0 * kPi / grid.lx * std::hypot(ka, kb);
      weight[static_cast<std::size_t>(a) * n + b] = (unit_weight || xi < 1.0) ? 1.0 : 1.0 + std::cbrt(xi);
    }
  double lhs = 0.0;
  for (const auto& r : rho) {
    if (r.size() != N) throw ValidationError("h16_lhs: rho size does not match the position grid");
    for (std::size_t i = 0; i < N; ++i) {
      buf[i][0] = r[i];
      buf[i][1] = 0.0;
    }
    fftw_execute(plan);
    double acc = 0.0;
    for (std::size_t i = 0; i < N; ++i) acc += weight[i] * (buf[i][0] * buf[i][0] + buf[i][1] * buf[i][1]);
    lhs += dt * acc / static_cast<double>(N) * grid.hx() * grid.hx();
  }
  {
    std::lock_guard<std::mutex> lock(planner_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  return lhs;
}

H16Estimate h16_estimate(const PhaseGrid& grid, const std::vector<std::vector<double>>& rho, double dt,
                         const std::vector<const DistributionField*>& f, const std::vector<const std::vector<double>*>& g,
                         const DistributionField& f0, bool unit_weight) {
  H16Estimate e;
  e.lhs = h16_lhs(grid, rho, dt, unit_weight);
  const double n0 = l2_norm(f0);
  e.rhs = n0 * n0;
  for (const DistributionField* p : f) {
    const double v = l2_norm(*p);
    e.rhs += dt * v * v;
  }
  for (const std::vector<double>* p : g) {
    double acc = 0.0;
    for (double v : *p) acc += v * v;
    e.rhs += dt * acc * grid.cell_volume();
  }
  return e;
}

}  // namespace kspde
