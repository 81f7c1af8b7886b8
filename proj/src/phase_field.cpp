#include "kspde/phase_field.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace kspde {

PhasePoint PhaseGrid::node(std::size_t idx) const {
  const int j2 = static_cast<int>(idx % nv);
  idx /= nv;
  const int j1 = static_cast<int>(idx % nv);
  idx /= nv;
  const int i2 = static_cast<int>(idx % nx);
  const int i1 = static_cast<int>(idx / nx);
  return PhasePoint{{x_node(i1), x_node(i2)}, {v_node(j1), v_node(j2)}};
}

void PhaseGrid::validate() const {
  if (nx < 1 || nv < 2) throw ValidationError("grid: need nx >= 1 and nv >= 2");
  if (!(lx > 0.0) || !(vmax > 0.0)) throw ValidationError("grid: lx and vmax must be positive");
}

DistributionField compose(const DistributionField& f, std::span<const PhasePoint> images,
                          ClampPolicy policy) {
  const PhaseGrid& g = f.grid();
  if (images.size() != g.size()) throw ValidationError("compose: image count does not match grid");
  DistributionField out(g, f.time());
  const double* data = f.values().data();
  double clamped = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    double val = interpolate(g, data, images[i]);
    if (policy == ClampPolicy::kClampNegative && val < 0.0) {
      clamped -= val;
      val = 0.0;
    }
    out[i] = val;
  }
  out.set_clamped_mass(clamped * g.cell_volume());
  return out;
}

double moment(const DistributionField& f, const PhaseWeight& w) {
  const PhaseGrid& g = f.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (f[i] == 0.0) continue;
    const PhasePoint p = g.node(i);
    acc += w(p.x, p.v) * f[i];
  }
  return acc * g.cell_volume();
}

namespace {

template <class Fn>
void for_each_velocity(const PhaseGrid& g, Fn&& fn) {
  const std::size_t bs = g.block();
  for (std::size_t ix = 0; ix < g.num_x(); ++ix) {
    const int i1 = static_cast<int>(ix / g.nx), i2 = static_cast<int>(ix % g.nx);
    const Vec2 x{g.x_node(i1), g.x_node(i2)};
    for (int j1 = 0; j1 < g.nv; ++j1) {
      for (int j2 = 0; j2 < g.nv; ++j2) {
        fn(ix * bs + static_cast<std::size_t>(j1) * g.nv + j2, x, Vec2{g.v_node(j1), g.v_node(j2)});
      }
    }
  }
}

}  // namespace

double mass(const DistributionField& f) {
  double acc = 0.0;
  for (double v : f.values()) acc += v;
  return acc * f.grid().cell_volume();
}

Vec2 momentum(const DistributionField& f) {
  Vec2 p{0.0, 0.0};
  for_each_velocity(f.grid(), [&](std::size_t i, const Vec2&, const Vec2& v) {
    p[0] += v[0] * f[i];
    p[1] += v[1] * f[i];
  });
  const double dv = f.grid().cell_volume();
  return {p[0] * dv, p[1] * dv};
}

double kinetic_energy(const DistributionField& f) {
  double e = 0.0;
  for_each_velocity(f.grid(), [&](std::size_t i, const Vec2&, const Vec2& v) { e += 0.5 * dot(v, v) * f[i]; });
  return e * f.grid().cell_volume();
}

double confinement_moment(const DistributionField& f) {
  double e = 0.0;
  for_each_velocity(f.grid(), [&](std::size_t i, const Vec2& x, const Vec2& v) {
    e += (1.0 + dot(x, x) + dot(v, v)) * f[i];
  });
  return e * f.grid().cell_volume();
}

double l1_norm(const DistributionField& f) {
  double acc = 0.0;
  for (double v : f.values()) acc += std::abs(v);
  return acc * f.grid().cell_volume();
}

double l1_distance(const DistributionField& f, const DistributionField& g) {
  double acc = 0.0;
  for (std::size_t i = 0; i < f.values().size(); ++i) acc += std::abs(f[i] - g[i]);
  return acc * f.grid().cell_volume();
}

double l2_norm(const DistributionField& f) {
  double acc = 0.0;
  for (double v : f.values()) acc += v * v;
  return std::sqrt(acc * f.grid().cell_volume());
}

double sup_norm(const DistributionField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

double entropy(const DistributionField& f) {
  double acc = 0.0;
  for (double v : f.values()) {
    if (v > 0.0) acc += v * std::log(v);
  }
  return acc * f.grid().cell_volume();
}

EntropySplit entropy_pm(const DistributionField& f) {
  EntropySplit s;
  double gauss = 0.0, weighted = 0.0;
  for_each_velocity(f.grid(), [&](std::size_t i, const Vec2& x, const Vec2& v) {
    const double r2 = dot(x, x) + dot(v, v);
    gauss += std::exp(-0.5 * r2);
    const double val = f[i];
    weighted += r2 * val;
    if (val > 0.0) {
      const double e = val * std::log(val);
      if (e > 0.0) s.positive += e; else s.negative -= e;
    }
  });
  const double dv = f.grid().cell_volume();
  s.positive *= dv;
  s.negative *= dv;
  s.negative_bound = (weighted + std::exp(-1.0) * gauss) * dv;
  return s;
}

std::vector<double> local_mass(const DistributionField& f) {
  const PhaseGrid& g = f.grid();
  std::vector<double> m(g.num_x(), 0.0);
  for (std::size_t ix = 0; ix < g.num_x(); ++ix) {
    double acc = 0.0;
    for (double v : f.block(ix)) acc += v;
    m[ix] = acc * g.velocity_cell();
  }
  return m;
}

namespace {

nlohmann::json grid_json(const PhaseGrid& g) {
  return {{"nx", g.nx}, {"nv", g.nv}, {"lx", g.lx}, {"vmax", g.vmax}};
}

}  // namespace

void write_snapshot(const std::string& path_stem, const DistributionField& f) {
  static_assert(std::endian::native == std::endian::little, "snapshots assume a little-endian host");
  std::ofstream bin(path_stem + ".bin", std::ios::binary);
  if (!bin) throw ValidationError("cannot open " + path_stem + ".bin for writing");
  bin.write(reinterpret_cast<const char*>(f.values().data()),
            static_cast<std::streamsize>(f.values().size() * sizeof(double)));
  nlohmann::json side = {{"t", f.time()}, {"grid", grid_json(f.grid())}, {"clamped_mass", f.clamped_mass()},
                         {"layout", "x1,x2,v1,v2 float64 little-endian"}};
  std::ofstream js(path_stem + ".json");
  js << side.dump(2) << "\n";
}

DistributionField read_snapshot(const std::string& path_stem) {
  std::ifstream js(path_stem + ".json");
  if (!js) throw ValidationError("missing snapshot sidecar: " + path_stem + ".json");
  nlohmann::json side = nlohmann::json::parse(js);
  PhaseGrid g;
  g.nx = side.at("grid").at("nx");
  g.nv = side.at("grid").at("nv");
  g.lx = side.at("grid").at("lx");
  g.vmax = side.at("grid").at("vmax");
  DistributionField f(g, side.at("t").get<double>());
  f.set_clamped_mass(side.value("clamped_mass", 0.0));
  std::ifstream bin(path_stem + ".bin", std::ios::binary);
  if (!bin) throw ValidationError("missing snapshot data: " + path_stem + ".bin");
  bin.read(reinterpret_cast<char*>(f.values().data()),
           static_cast<std::streamsize>(f.values().size() * sizeof(double)));
  if (bin.gcount() != static_cast<std::streamsize>(f.values().size() * sizeof(double))) {
    throw ValidationError("truncated snapshot data: " + path_stem + ".bin");
  }
  return f;
}

// ---------------------------------------------------------------------------

double InitialCondition::eval(const Vec2& x, const Vec2& v, double lx) const {
  const double arg = 2.0 * kPi * (mod_k[0] * x[0] + mod_k[1] * x[1]) / lx;
  const double rho_x = 1.0 + mod_amplitude * std::cos(arg);
  switch (kind) {
    case Kind::kMaxwellian: {
      const Vec2 d{v[0] - u[0], v[1] - u[1]};
      return rho_x * rho / (2.0 * kPi * theta) * std::exp(-dot(d, d) / (2.0 * theta));
    }
    case Kind::kDoubleBump: {
      double s = 0.0;
      for (const Vec2& c : centers) {
        const Vec2 d{v[0] - c[0], v[1] - c[1]};
        s += std::exp(-dot(d, d) / (2.0 * width * width));
      }
      return rho_x * amplitude * s;
    }
    case Kind::kBox: {
      const bool in = v[0] >= v_lo[0] && v[0] <= v_hi[0] && v[1] >= v_lo[1] && v[1] <= v_hi[1];
      return in ? rho_x * value : 0.0;
    }
  }
  return 0.0;
}

double InitialCondition::support_radius() const {
  switch (kind) {
    case Kind::kMaxwellian:
      return norm(u) + 3.0 * std::sqrt(theta);
    case Kind::kDoubleBump: {
      double r = 0.0;
      for (const Vec2& c : centers) r = std::max(r, norm(c) + 3.0 * width);
      return r;
    }
    case Kind::kBox: {
      double r = 0.0;
      for (double a : {v_lo[0], v_hi[0]})
        for (double b : {v_lo[1], v_hi[1]}) r = std::max(r, std::hypot(a, b));
      return r;
    }
  }
  return 0.0;
}

DistributionField InitialCondition::sample(const PhaseGrid& g) const {
  DistributionField f(g, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const PhasePoint p = g.node(i);
    f[i] = eval(p.x, p.v, g.lx);
  }
  return f;
}

double InitialCondition::interpolation_tolerance(const PhaseGrid& g) const {
  const DistributionField f = sample(g);
  const double fmax = sup_norm(f);
  if (fmax == 0.0) return 0.0;
  double err = 0.0;
  const double hx = g.hx(), hv = g.hv();
  for (std::size_t i = 0; i < g.size(); ++i) {
    PhasePoint p = g.node(i);
    p.x[0] += 0.5 * hx;
    p.x[1] += 0.5 * hx;
    p.v[0] += 0.5 * hv;
    p.v[1] += 0.5 * hv;
    const double exact = (std::abs(p.v[0]) > g.vmax || std::abs(p.v[1]) > g.vmax) ? 0.0 : eval(p.x, p.v, g.lx);
    err = std::max(err, std::abs(interpolate(f, p) - exact));
  }
  return err / fmax;
}

}  // namespace kspde
