#include "kspde/kinetic_solver.hpp"

#include <algorithm>
#include <string>

#include "kspde/rng.hpp"

namespace kspde {

double WindowLog::max_ratio() const {
  double r = 0.0;
  for (double v : ratios) r = std::max(r, v);
  return r;
}

namespace {

constexpr std::size_t kCacheBudgetBytes = std::size_t{384} << 20;

/// Backward characteristics from every node at time t_j down to t_a.
/// Positions for each (j, i) pair can be cached for reuse across Picard iterations.
class Characteristics {
 public:
  Characteristics(const PhaseGrid& g, const NoiseModel& m, const BrownianPath& path, int a, int b, bool allow_cache)
      : g_(g), m_(m), path_(path), a_(a), b_(b) {
    const std::size_t pairs = static_cast<std::size_t>(b - a) * (b - a + 1) / 2;
    cache_ = allow_cache && pairs * g.size() * sizeof(PhasePoint) <= kCacheBudgetBytes;
    if (cache_) {
      store_.resize(pairs * g.size());
      for (int j = a + 1; j <= b; ++j) {
        sweep_compute(j, [&](int i, const std::vector<PhasePoint>& pos) {
          std::copy(pos.begin(), pos.end(), store_.begin() + static_cast<std::ptrdiff_t>(offset(j, i) * g.size()));
        });
      }
    }
  }

  /// Calls fn(i, positions) for i = j-1 down to a, positions = Psi_{t_i, t_j}(nodes).
  template <class Fn>
  void sweep(int j, Fn&& fn) const {
    if (cache_) {
      std::vector<PhasePoint> pos(g_.size());
      for (int i = j - 1; i >= a_; --i) {
        const auto first = store_.begin() + static_cast<std::ptrdiff_t>(offset(j, i) * g_.size());
        std::copy(first, first + static_cast<std::ptrdiff_t>(g_.size()), pos.begin());
        fn(i, pos);
      }
    } else {
      sweep_compute(j, fn);
    }
  }

 private:
  std::size_t offset(int j, int i) const {
    const std::size_t jj = static_cast<std::size_t>(j - a_ - 1);
    return jj * (jj + 1) / 2 + static_cast<std::size_t>(i - a_);
  }

  template <class Fn>
  void sweep_compute(int j, Fn&& fn) const {
    std::vector<PhasePoint> pos(g_.size());
    for (std::size_t n = 0; n < pos.size(); ++n) pos[n] = g_.node(n);
    const double vm = m_.vmax();
    for (int i = j - 1; i >= a_; --i) {
      const double* db = path_.step(i);
      for (PhasePoint& p : pos) {
        heun_step(m_, p, path_.dt(), db, -1.0);
        if (std::abs(p.v[0]) > vm || std::abs(p.v[1]) > vm) {
          throw InvariantViolation("backward characteristic left the velocity box", "velocity_box");
        }
      }
      fn(i, pos);
    }
  }

  const PhaseGrid& g_;
  const NoiseModel& m_;
  const BrownianPath& path_;
  int a_, b_;
  bool cache_ = false;
  std::vector<PhasePoint> store_;
};

/// Duhamel value at step j of a window starting at a.
DistributionField duhamel(const Characteristics& ch, const DistributionField& start,
                          const std::vector<const std::vector<double>*>& drivers, int a, int j, double dt,
                          ClampPolicy clamp) {
  const PhaseGrid& g = start.grid();
  DistributionField out(g, j * dt);
  std::vector<double>& acc = out.values();
  ch.sweep(j, [&](int i, const std::vector<PhasePoint>& pos) {
    const std::vector<double>* drv = drivers[static_cast<std::size_t>(i - a)];
    if (drv != nullptr) {
      const double* data = drv->data();
      for (std::size_t n = 0; n < pos.size(); ++n) acc[n] += dt * interpolate(g, data, pos[n]);
    }
    if (i == a) {
      const double* data = start.values().data();
      for (std::size_t n = 0; n < pos.size(); ++n) acc[n] += interpolate(g, data, pos[n]);
    }
  });
  if (clamp == ClampPolicy::kClampNegative) {
    double clamped = 0.0;
    for (double& v : acc) {
      if (v < 0.0) {
        clamped -= v;
        v = 0.0;
      }
    }
    out.set_clamped_mass(clamped * g.cell_volume());
  }
  return out;
}

void check_model(const NoiseModel& model, const BrownianPath& path, const PhaseGrid& g) {
  if (static_cast<std::size_t>(path.num_modes()) != model.num_modes()) {
    throw ValidationError("brownian path and noise model disagree on the number of modes");
  }
  if (!model.is_constant() && std::abs(model.lx() - g.lx) > 1e-12) {
    throw ValidationError("noise model torus length differs from grid");
  }
}

}  // namespace

Trajectory solve_transport(const DistributionField& f0, const std::vector<std::vector<double>>& drivers,
                           const NoiseModel& model, const BrownianPath& path, double T, std::vector<int> output_steps,
                           ClampPolicy clamp) {
  const PhaseGrid& g = f0.grid();
  check_model(model, path, g);
  const int N = aligned_step(T, path.dt(), "T");
  if (N > path.n_steps()) throw ValidationError("solve_transport: T beyond the Brownian path");
  if (!drivers.empty() && static_cast<int>(drivers.size()) < N) throw ValidationError("solve_transport: need one driver per step");
  if (output_steps.empty()) {
    for (int j = 0; j <= N; ++j) output_steps.push_back(j);
  }
  std::sort(output_steps.begin(), output_steps.end());
  std::vector<const std::vector<double>*> drv(static_cast<std::size_t>(N), nullptr);
  for (int i = 0; i < N && !drivers.empty(); ++i) {
    if (drivers[i].size() != g.size()) throw ValidationError("solve_transport: driver size mismatch");
    drv[i] = &drivers[i];
  }
  Trajectory tr;
  tr.grid = g;
  tr.dt = path.dt();
  const Characteristics ch(g, model, path, 0, N, false);
  for (int j : output_steps) {
    if (j < 0 || j > N) throw ValidationError("solve_transport: output step out of range");
    DistributionField f = (j == 0) ? f0 : duhamel(ch, f0, drv, 0, j, path.dt(), clamp);
    f.set_time(j * path.dt());
    tr.clamped_mass += f.clamped_mass();
    tr.steps.push_back(j);
    tr.fields.push_back(std::move(f));
  }
  return tr;
}

LipschitzProbe probe_lipschitz(const DistributionField& f0, const CollisionOperator& op, double n, int pairs,
                               std::uint64_t seed) {
  LipschitzProbe r;
  const std::size_t N = f0.values().size();
  for (int p = 0; p < pairs; ++p) {
    DistributionField f(f0.grid()), g(f0.grid());
    for (std::size_t i = 0; i < N; ++i) {
      f[i] = f0[i] * (1.0 + 0.1 * (2.0 * counter_uniform(seed, p, i, 1) - 1.0));
      g[i] = f0[i] * (1.0 + 0.1 * (2.0 * counter_uniform(seed, p, i, 2) - 1.0));
    }
    const DistributionField bf = eval_truncated(f, op, n), bg = eval_truncated(g, op, n);
    const double den = l1_distance(f, g);
    if (den > 0.0) r.l1_ratio = std::max(r.l1_ratio, l1_distance(bf, bg) / den);
    const double fs = sup_norm(f);
    if (fs > 0.0) r.linf_ratio = std::max(r.linf_ratio, sup_norm(bf) / fs);
  }
  return r;
}

Trajectory picard_solve(const DistributionField& f0, const CollisionOperator& op, double n, const NoiseModel& model,
                        const BrownianPath& path, double T, const PicardOptions& opts) {
  const PhaseGrid& g = f0.grid();
  check_model(model, path, g);
  if (!(n > 0.0)) throw ValidationError("picard_solve: truncation level n must be positive");
  if (opts.max_iter < 1) throw ValidationError("picard_solve: max_iter must be >= 1");
  const int N = aligned_step(T, path.dt(), "T");
  if (N > path.n_steps()) throw ValidationError("picard_solve: T beyond the Brownian path");
  const double dt = path.dt();

  Trajectory tr;
  tr.grid = g;
  tr.dt = dt;
  tr.truncation = n;
  tr.lipschitz_estimate = opts.safety * probe_lipschitz(f0, op, n, opts.probes, opts.probe_seed).l1_ratio;
  int m = N;
  if (tr.lipschitz_estimate > 0.0) {
    const double tw = 0.5 / tr.lipschitz_estimate;
    m = std::clamp(static_cast<int>(std::floor(tw / dt + 1e-9)), 1, std::max(N, 1));
  }
  tr.window_length = m * dt;
  tr.steps.reserve(static_cast<std::size_t>(N) + 1);
  tr.fields.reserve(static_cast<std::size_t>(N) + 1);
  tr.steps.push_back(0);
  tr.fields.push_back(f0);
  tr.fields.back().set_time(0.0);
  tr.drivers.assign(static_cast<std::size_t>(N), {});

  for (int a = 0; a < N; a += m) {
    const int b = std::min(a + m, N);
    const DistributionField start = tr.fields.back();
    const double start_mass = std::max(l1_norm(start), 1e-300);
    const Characteristics ch(g, model, path, a, b, true);
    std::vector<DistributionField> prev(static_cast<std::size_t>(b - a + 1), DistributionField(g));
    std::vector<std::vector<double>> drv_store(static_cast<std::size_t>(b - a));
    std::vector<const std::vector<double>*> drv(static_cast<std::size_t>(b - a), nullptr);
    WindowLog log;
    log.first_step = a;
    log.last_step = b;
    int streak = 0;
    bool converged = false;
    for (int k = 1; k <= opts.max_iter; ++k) {
      if (k > 1) {
        for (int i = a; i < b; ++i) {
          const std::size_t li = static_cast<std::size_t>(i - a);
          drv_store[li] = eval_truncated(prev[li], op, n).values();
          drv[li] = &drv_store[li];
        }
      }
      std::vector<DistributionField> cur;
      cur.reserve(prev.size());
      cur.push_back(start);
      double dist = l1_distance(start, prev[0]);
      for (int j = a + 1; j <= b; ++j) {
        cur.push_back(duhamel(ch, start, drv, a, j, dt, ClampPolicy::kClampNegative));
        dist = std::max(dist, l1_distance(cur.back(), prev[static_cast<std::size_t>(j - a)]));
      }
      if (!log.distances.empty()) {
        const double ratio = dist / log.distances.back();
        log.ratios.push_back(ratio);
        streak = ratio >= 1.0 ? streak + 1 : 0;
      }
      log.distances.push_back(dist);
      log.iterations = k;
      prev = std::move(cur);
      if (dist < opts.tol * start_mass) {
        converged = true;
        break;
      }
      if (streak >= 3) {
        throw InvariantViolation("Picard iteration not contracting on window [" + std::to_string(a * dt) + ", " +
                                     std::to_string(b * dt) + "]",
                                 "picard_not_contracting");
      }
    }
    if (!converged) {
      throw InvariantViolation("Picard iteration exceeded max_iter = " + std::to_string(opts.max_iter) +
                                   " on window [" + std::to_string(a * dt) + ", " + std::to_string(b * dt) + "]",
                               "picard_max_iter");
    }
    for (int i = a; i < b; ++i) {
      const std::size_t li = static_cast<std::size_t>(i - a);
      tr.drivers[static_cast<std::size_t>(i)] = drv[li] ? std::move(drv_store[li]) : std::vector<double>(g.size(), 0.0);
    }
    for (int j = a + 1; j <= b; ++j) {
      DistributionField& f = prev[static_cast<std::size_t>(j - a)];
      f.set_time(j * dt);
      tr.clamped_mass += f.clamped_mass();
      tr.steps.push_back(j);
      tr.fields.push_back(std::move(f));
    }
    tr.windows.push_back(std::move(log));
  }
  if (opts.compute_dissipation) {
    for (const DistributionField& f : tr.fields) tr.dissipation.push_back(entropy_dissipation(f, op, n).total);
  }
  return tr;
}

PositivityReport positivity_floor_check(const Trajectory& traj, const DistributionField& f0,
                                        const CollisionOperator& op, const NoiseModel& model,
                                        const BrownianPath& path, double cbar) {
  PositivityReport r;
  r.sup_f0 = sup_norm(f0);
  if (cbar < 0.0) {
    double proxy = 0.0;
    for (const DistributionField& f : traj.fields) {
      for (double m : local_mass(f)) {
        const double q = std::isinf(traj.truncation) ? m : m / (1.0 + m / traj.truncation);
        proxy = std::max(proxy, q);
      }
    }
    cbar = 1.1 * op.bbar_sup() * proxy;
  }
  r.cbar = cbar;
  if (traj.steps.empty()) return r;
  const double T = traj.steps.back() * traj.dt;
  const Trajectory free = solve_transport(f0, {}, model, path, T, traj.steps);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double decay = std::exp(-cbar * traj.time(k));
    const auto& lower = free.fields[k].values();
    const auto& f = traj.fields[k].values();
    for (std::size_t i = 0; i < f.size(); ++i) r.max_violation = std::max(r.max_violation, decay * lower[i] - f[i]);
  }
  return r;
}

}  // namespace kspde
