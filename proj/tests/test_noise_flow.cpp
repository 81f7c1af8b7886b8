#include <doctest.h>

#include "helpers.hpp"
#include "kspde/stochastic_flow.hpp"

using namespace kspde;

namespace {

NoiseModel standard_noise() {
  const SimConfig c = SimConfig::standard();
  return c.noise_model();
}

PhasePoint random_point(int i, double vr = 2.0) {
  PhasePoint p;
  p.x = {(counter_uniform(41, i, 0, 0) - 0.5) * 2.0 * kPi, (counter_uniform(41, i, 1, 0) - 0.5) * 2.0 * kPi};
  p.v = {(2.0 * counter_uniform(41, i, 2, 0) - 1.0) * vr, (2.0 * counter_uniform(41, i, 3, 0) - 1.0) * vr};
  return p;
}

}  // namespace

TEST_CASE("counter rng is a pure function of its counters") {
  CHECK(counter_uniform(1, 2, 3, 4) == counter_uniform(1, 2, 3, 4));
  CHECK(counter_uniform(1, 2, 3, 4) != counter_uniform(1, 2, 3, 5));
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = counter_normal(9, i, 0, 0);
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 5.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
  CHECK(derive_seed(5, 0) != derive_seed(5, 1));
}

TEST_CASE("stream noise is divergence free in v and vanishes on the collar") {
  const NoiseModel m = standard_noise();
  const double h = 1e-5;
  for (int i = 0; i < 50; ++i) {
    const PhasePoint p = random_point(i, 3.5);
    for (std::size_t k = 0; k < m.num_modes(); ++k) {
      const double d1 = (m.sigma(k, p.x, {p.v[0] + h, p.v[1]})[0] - m.sigma(k, p.x, {p.v[0] - h, p.v[1]})[0]) / (2 * h);
      const double d2 = (m.sigma(k, p.x, {p.v[0], p.v[1] + h})[1] - m.sigma(k, p.x, {p.v[0], p.v[1] - h})[1]) / (2 * h);
      CHECK(std::abs(d1 + d2) < 1e-7);
    }
  }
  const double edge = 4.0 - 2.0 * SimConfig::standard().grid.hv();
  for (double t = 0; t < 2 * kPi; t += 0.1) {
    const Vec2 v{edge * std::cos(t), edge * std::sin(t)};
    for (std::size_t k = 0; k < m.num_modes(); ++k) {
      const Vec2 s = m.sigma(k, {0.3, -0.2}, v);
      CHECK(norm(s) == 0.0);
    }
  }
}

TEST_CASE("sigma jet matches finite differences") {
  const NoiseModel m = standard_noise();
  const double h = 1e-6;
  for (int i = 0; i < 20; ++i) {
    const PhasePoint p = random_point(i);
    for (std::size_t k = 0; k < m.num_modes(); ++k) {
      Vec2 s;
      Mat2 ds;
      m.sigma_jet(k, p.x, p.v, s, ds);
      for (int b = 0; b < 2; ++b) {
        Vec2 vp = p.v, vm = p.v;
        vp[b] += h;
        vm[b] -= h;
        const Vec2 sp = m.sigma(k, p.x, vp), sm = m.sigma(k, p.x, vm);
        for (int a = 0; a < 2; ++a) CHECK(ds[a][b] == doctest::Approx((sp[a] - sm[a]) / (2 * h)).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("generator of |v|^2/2 is half the energy drift density") {
  const NoiseModel m = standard_noise();
  const Mat2 id{{{1.0, 0.0}, {0.0, 1.0}}};
  for (int i = 0; i < 30; ++i) {
    const PhasePoint p = random_point(i);
    const double lhs = m.generator(p.x, p.v, p.v, id);
    CHECK(lhs == doctest::Approx(0.5 * m.energy_drift_density(p.x, p.v)).epsilon(1e-12));
  }
}

TEST_CASE("constant noise has no Ito drift") {
  const NoiseModel c = NoiseModel::constant_for_testing({{1.0, 0.3}, {-0.2, 0.5}});
  const Vec2 d = c.ito_drift({0.1, 0.2}, {1.0, -1.0});
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 0.0);
}

TEST_CASE("brownian path coarsening and refinement are consistent") {
  const BrownianPath p = BrownianPath::sample(3, 0.01, 24, 2);
  const BrownianPath c = p.coarsened(4);
  CHECK(c.n_steps() == 6);
  CHECK(c.dt() == doctest::Approx(0.04));
  for (int k = 0; k < 2; ++k) CHECK(c.value(k, 6) == doctest::Approx(p.value(k, 24)).epsilon(1e-14));
  const BrownianPath r = p.refined(1);
  CHECK(r.n_steps() == 48);
  for (int i = 0; i <= 24; ++i)
    for (int k = 0; k < 2; ++k) CHECK(r.value(k, 2 * i) == doctest::Approx(p.value(k, i)).epsilon(1e-12));
  CHECK_THROWS_AS(p.coarsened(5), ValidationError);
  // The same seed gives the same path.
  const BrownianPath q = BrownianPath::sample(3, 0.01, 24, 2);
  for (int i = 0; i < 24; ++i) CHECK(q.increment(1, i) == p.increment(1, i));
}

TEST_CASE("without noise the flow is free streaming") {
  const PhaseGrid g = SimConfig::standard().grid;
  const NoiseModel m = NoiseModel::make_stream_noise(test::zero_noise(), g);
  const BrownianPath path = BrownianPath::sample(1, 0.01, 20, 2);
  std::vector<PhasePoint> pts;
  for (int i = 0; i < 10; ++i) pts.push_back(random_point(i));
  const auto out = integrate_flow(m, path, 0.0, 0.2, pts, Wrap::kUnwrapped);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(out[i].v[0] == pts[i].v[0]);
    CHECK(out[i].x[0] == doctest::Approx(pts[i].x[0] + 0.2 * pts[i].v[0]).epsilon(1e-13));
    CHECK(out[i].x[1] == doctest::Approx(pts[i].x[1] + 0.2 * pts[i].v[1]).epsilon(1e-13));
  }
}

TEST_CASE("inverse flow undoes the forward flow") {
  const NoiseModel m = standard_noise();
  const BrownianPath path = BrownianPath::sample(2, 0.005, 40, 2);
  std::vector<PhasePoint> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(random_point(i));
  const auto fwd = integrate_flow(m, path, 0.0, 0.2, pts, Wrap::kUnwrapped);
  const auto back = inverse_flow(m, path, 0.0, 0.2, fwd, Wrap::kUnwrapped);
  double err = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int a = 0; a < 2; ++a)
      err = std::max({err, std::abs(back[i].x[a] - pts[i].x[a]), std::abs(back[i].v[a] - pts[i].v[a])});
  // Heun is not exactly reversible; the mismatch is third order per step.
  CHECK(err < 5e-4);
}

TEST_CASE("flow jacobian stays near one") {
  const NoiseModel m = standard_noise();
  const BrownianPath path = BrownianPath::sample(4, 0.002, 50, 2);
  for (int i = 0; i < 10; ++i) CHECK(std::abs(jacobian_det(m, path, 0.0, 0.1, random_point(i)) - 1.0) < 1e-3);
}
