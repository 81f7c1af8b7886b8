#include "kspde/stochastic_flow.hpp"

#include <algorithm>
#include <fstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "kspde/rng.hpp"

namespace kspde {

BrownianPath BrownianPath::sample(std::uint64_t seed, double dt, int n_steps, int num_modes) {
  if (!(dt > 0.0) || n_steps < 0 || num_modes < 0) throw ValidationError("brownian: invalid dt/steps/modes");
  BrownianPath p;
  p.dt_ = dt;
  p.n_steps_ = n_steps;
  p.num_modes_ = num_modes;
  p.seed_ = seed;
  p.incr_.resize(static_cast<std::size_t>(n_steps) * num_modes);
  const double sd = std::sqrt(dt);
  for (int i = 0; i < n_steps; ++i)
    for (int k = 0; k < num_modes; ++k)
      p.incr_[static_cast<std::size_t>(i) * num_modes + k] = sd * counter_normal(seed, k, i, 0);
  return p;
}

BrownianPath BrownianPath::from_increments(double dt, int num_modes, std::vector<double> increments) {
  if (num_modes <= 0 || increments.size() % num_modes != 0) throw ValidationError("brownian: bad increment array");
  BrownianPath p;
  p.dt_ = dt;
  p.num_modes_ = num_modes;
  p.n_steps_ = static_cast<int>(increments.size() / num_modes);
  p.incr_ = std::move(increments);
  return p;
}

BrownianPath BrownianPath::refined(int levels) const {
  BrownianPath cur = *this;
  for (int l = 0; l < levels; ++l) {
    BrownianPath nxt;
    nxt.dt_ = 0.5 * cur.dt_;
    nxt.n_steps_ = 2 * cur.n_steps_;
    nxt.num_modes_ = cur.num_modes_;
    nxt.level_ = cur.level_ + 1;
    nxt.seed_ = cur.seed_;
    nxt.incr_.resize(cur.incr_.size() * 2);
    const double half_sd = 0.5 * std::sqrt(cur.dt_);
    const int K = cur.num_modes_;
    for (int i = 0; i < cur.n_steps_; ++i) {
      for (int k = 0; k < K; ++k) {
        const double d = cur.increment(k, i);
        const double left = 0.5 * d + half_sd * counter_normal(cur.seed_, k, i, 1000 + nxt.level_);
        nxt.incr_[static_cast<std::size_t>(2 * i) * K + k] = left;
        nxt.incr_[static_cast<std::size_t>(2 * i + 1) * K + k] = d - left;
      }
    }
    cur = std::move(nxt);
  }
  return cur;
}

BrownianPath BrownianPath::coarsened(int factor) const {
  if (factor < 1 || n_steps_ % factor != 0) throw ValidationError("coarsened: factor must divide the step count");
  BrownianPath out;
  out.dt_ = dt_ * factor;
  out.n_steps_ = n_steps_ / factor;
  out.num_modes_ = num_modes_;
  out.level_ = level_;
  out.seed_ = seed_;
  out.incr_.assign(static_cast<std::size_t>(out.n_steps_) * num_modes_, 0.0);
  for (int i = 0; i < n_steps_; ++i)
    for (int k = 0; k < num_modes_; ++k) out.incr_[static_cast<std::size_t>(i / factor) * num_modes_ + k] += increment(k, i);
  return out;
}

double BrownianPath::value(int k, int i) const {
  double acc = 0.0;
  for (int j = 0; j < i; ++j) acc += increment(k, j);
  return acc;
}

namespace {

void check_box(const NoiseModel& m, const PhasePoint& p) {
  const double vm = m.vmax();
  if (std::abs(p.v[0]) > vm || std::abs(p.v[1]) > vm) {
    throw InvariantViolation("trajectory left the velocity box at v = (" + std::to_string(p.v[0]) + ", " +
                                 std::to_string(p.v[1]) + ")",
                             "velocity_box");
  }
}

void check_path(const NoiseModel& m, const BrownianPath& path) {
  if (static_cast<std::size_t>(path.num_modes()) != m.num_modes()) {
    throw ValidationError("brownian path has " + std::to_string(path.num_modes()) + " modes, noise model has " +
                          std::to_string(m.num_modes()));
  }
}

}  // namespace

std::vector<PhasePoint> integrate_flow(const NoiseModel& m, const BrownianPath& path, double s, double t,
                                       std::vector<PhasePoint> points, Wrap wrap) {
  check_path(m, path);
  const int a = aligned_step(s, path.dt(), "s"), b = aligned_step(t, path.dt(), "t");
  if (a > b || b > path.n_steps()) throw ValidationError("integrate_flow: need s <= t <= path end");
  for (PhasePoint& p : points) {
    for (int i = a; i < b; ++i) {
      heun_step(m, p, path.dt(), path.step(i), 1.0);
      check_box(m, p);
    }
    if (wrap == Wrap::kTorus) {
      p.x[0] = wrap_torus(p.x[0], m.lx());
      p.x[1] = wrap_torus(p.x[1], m.lx());
    }
  }
  return points;
}

std::vector<PhasePoint> inverse_flow(const NoiseModel& m, const BrownianPath& path, double s, double t,
                                     std::vector<PhasePoint> points, Wrap wrap) {
  check_path(m, path);
  const int a = aligned_step(s, path.dt(), "s"), b = aligned_step(t, path.dt(), "t");
  if (a > b || b > path.n_steps()) throw ValidationError("inverse_flow: need s <= t <= path end");
  for (PhasePoint& p : points) {
    for (int i = b - 1; i >= a; --i) {
      heun_step(m, p, path.dt(), path.step(i), -1.0);
      check_box(m, p);
    }
    if (wrap == Wrap::kTorus) {
      p.x[0] = wrap_torus(p.x[0], m.lx());
      p.x[1] = wrap_torus(p.x[1], m.lx());
    }
  }
  return points;
}

FlowMap compute_flow_map(const PhaseGrid& grid, const NoiseModel& m, const BrownianPath& path, double s, double t,
                         bool inverse) {
  FlowMap map;
  map.grid = grid;
  map.s = s;
  map.t = t;
  map.inverse = inverse;
  map.seed = path.seed();
  std::vector<PhasePoint> nodes(grid.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = grid.node(i);
  map.images = inverse ? inverse_flow(m, path, s, t, std::move(nodes)) : integrate_flow(m, path, s, t, std::move(nodes));
  return map;
}

DistributionField compose(const DistributionField& f, const FlowMap& map, ClampPolicy policy) {
  if (!(f.grid() == map.grid)) throw ValidationError("compose: flow map grid differs from field grid");
  DistributionField out = compose(f, std::span<const PhasePoint>(map.images), policy);
  out.set_time(map.t);
  return out;
}

void write_flow_map(const std::string& path_stem, const FlowMap& map) {
  std::ofstream bin(path_stem + ".bin", std::ios::binary);
  if (!bin) throw ValidationError("cannot open " + path_stem + ".bin for writing");
  for (const PhasePoint& p : map.images) {
    const double row[4] = {p.x[0], p.x[1], p.v[0], p.v[1]};
    bin.write(reinterpret_cast<const char*>(row), sizeof(row));
  }
  nlohmann::json side = {{"shape", {map.images.size(), 4}}, {"s", map.s}, {"t", map.t}, {"seed", map.seed},
                         {"inverse", map.inverse}};
  std::ofstream js(path_stem + ".json");
  js << side.dump(2) << "\n";
}

GrowthStat flow_growth_stat(const NoiseModel& m, const BrownianPath& path, double T,
                            std::span<const PhasePoint> samples) {
  const int n = aligned_step(T, path.dt(), "T");
  if (n > path.n_steps()) throw ValidationError("flow_growth_stat: T beyond path end");
  GrowthStat g;
  auto size = [](const PhasePoint& p) { return norm(p.x) + norm(p.v); };
  for (const PhasePoint& z : samples) {
    const double nz = 1.0 + size(z);
    for (int s = 0; s <= n; ++s) {
      PhasePoint p = z;
      for (int t = s; t <= n; ++t) {
        if (t > s) heun_step(m, p, path.dt(), path.step(t - 1), 1.0);
        const double np = size(p);
        g.growth = std::max(g.growth, np / (nz * nz));
        g.reciprocal = std::max(g.reciprocal, nz / ((1.0 + np) * (1.0 + np)));
      }
    }
  }
  return g;
}

double jacobian_det(const NoiseModel& m, const BrownianPath& path, double s, double t, const PhasePoint& z,
                    double fd_h) {
  Eigen::Matrix4d J;
  for (int c = 0; c < 4; ++c) {
    PhasePoint a = z, b = z;
    if (c < 2) { a.x[c] += fd_h; b.x[c] -= fd_h; } else { a.v[c - 2] += fd_h; b.v[c - 2] -= fd_h; }
    auto pa = integrate_flow(m, path, s, t, {a}, Wrap::kUnwrapped)[0];
    auto pb = integrate_flow(m, path, s, t, {b}, Wrap::kUnwrapped)[0];
    const double da[4] = {pa.x[0], pa.x[1], pa.v[0], pa.v[1]};
    const double db[4] = {pb.x[0], pb.x[1], pb.v[0], pb.v[1]};
    for (int r = 0; r < 4; ++r) J(r, c) = (da[r] - db[r]) / (2.0 * fd_h);
  }
  return J.determinant();
}

}  // namespace kspde
