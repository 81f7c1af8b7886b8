#include <doctest.h>

#include <filesystem>

#include "helpers.hpp"
#include "kspde/collision.hpp"

using namespace kspde;

TEST_CASE("grid layout has v2 fastest") {
  const PhaseGrid g{4, 6, 2.0 * kPi, 3.0};
  const std::size_t i = g.index(1, 2, 3, 4);
  const PhasePoint p = g.node(i);
  CHECK(p.x[0] == doctest::Approx(g.x_node(1)));
  CHECK(p.x[1] == doctest::Approx(g.x_node(2)));
  CHECK(p.v[0] == doctest::Approx(g.v_node(3)));
  CHECK(p.v[1] == doctest::Approx(g.v_node(4)));
  CHECK(g.index(1, 2, 3, 5) == i + 1);
  CHECK(g.x_node(0) == doctest::Approx(-kPi));
  CHECK(g.v_node(0) == doctest::Approx(-3.0 + 0.5));
}

TEST_CASE("moments of a sampled Maxwellian") {
  InitialCondition ic;
  ic.kind = InitialCondition::Kind::kMaxwellian;
  ic.rho = 1.0;
  ic.theta = 1.0;
  ic.u = {0.3, -0.2};
  const PhaseGrid g{4, 48, 2.0 * kPi, 7.0};
  const DistributionField f = ic.sample(g);
  const double area = g.lx * g.lx;
  CHECK(mass(f) == doctest::Approx(area).epsilon(1e-8));
  const Vec2 p = momentum(f);
  CHECK(p[0] == doctest::Approx(0.3 * area).epsilon(1e-8));
  CHECK(p[1] == doctest::Approx(-0.2 * area).epsilon(1e-8));
  // int |v|^2/2 f = (|u|^2 + 2 theta) / 2 per unit area
  CHECK(kinetic_energy(f) == doctest::Approx(0.5 * (0.13 + 2.0) * area).epsilon(1e-8));
  // H = -log(2 pi theta) - 1 per unit area
  CHECK(entropy(f) == doctest::Approx((-std::log(2.0 * kPi) - 1.0) * area).epsilon(1e-6));
}

TEST_CASE("interpolation is exact at nodes and for multilinear data") {
  const PhaseGrid g{6, 10, 2.0 * kPi, 4.0};
  DistributionField f(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const PhasePoint p = g.node(i);
    f[i] = 1.0 + 0.2 * p.v[0] - 0.1 * p.v[1] + 0.05 * p.v[0] * p.v[1];
  }
  for (std::size_t i = 0; i < g.size(); i += 37) CHECK(interpolate(f, g.node(i)) == doctest::Approx(f[i]));
  const PhasePoint q{{0.1, -0.4}, {0.33, -1.27}};
  CHECK(interpolate(f, q) == doctest::Approx(1.0 + 0.2 * 0.33 + 0.1 * 1.27 - 0.05 * 0.33 * 1.27));
  CHECK(interpolate(f, PhasePoint{{0.0, 0.0}, {4.5, 0.0}}) == 0.0);
}

TEST_CASE("entropy negative part respects its bound") {
  const PhaseGrid g{4, 16, 2.0 * kPi, 4.0};
  for (int s = 0; s < 5; ++s) {
    const EntropySplit e = entropy_pm(test::lobes(g, s));
    CHECK(e.negative >= 0.0);
    CHECK(e.negative <= e.negative_bound);
  }
}

TEST_CASE("snapshot round trip is bit exact") {
  const PhaseGrid g{4, 8, 2.0 * kPi, 4.0};
  DistributionField f = test::lobes(g, 3);
  f.set_time(0.125);
  const std::string stem = (std::filesystem::temp_directory_path() / "kspde_snapshot_test").string();
  write_snapshot(stem, f);
  const DistributionField r = read_snapshot(stem);
  CHECK(r.grid() == g);
  CHECK(r.time() == 0.125);
  CHECK(r.values() == f.values());
}

TEST_CASE("angular average of the kernel matches quadrature") {
  KernelSpec ks;
  ks.radius = 5.0;
  for (auto kind : {KernelSpec::Kind::kPseudoMaxwellian, KernelSpec::Kind::kMollifiedHardSphere}) {
    ks.kind = kind;
    const CollisionKernel k(ks);
    for (double z : {0.3, 1.0, 2.2, 3.7}) CHECK(k.bbar_quadrature(z, 4096) == doctest::Approx(k.bbar_exact(z)).epsilon(1e-6));
    CHECK(k.b(5.0, 1.0) == 0.0);
  }
  CHECK(smooth_cutoff(0.25) == 1.0);
  CHECK(smooth_cutoff(1.0) == 0.0);
}

TEST_CASE("collision operator: invariants, sign and truncation") {
  KernelSpec ks;
  ks.radius = 6.0;
  ks.n_theta = 16;
  const CollisionOperator op(CollisionKernel(ks), VelocityGrid{2, 16, 4.0});
  const PhaseGrid g{1, 16, 2.0 * kPi, 4.0};
  const DistributionField f = test::lobes(g, 11);
  const auto blk = f.block(0);
  for (auto xi : std::vector<std::function<double(const Vec2&)>>{[](const Vec2&) { return 1.0; },
                                                                 [](const Vec2& v) { return v[0] - 2.0 * v[1]; },
                                                                 [](const Vec2& v) { return dot(v, v); }}) {
    const InvariantResidual r = op.invariant_residual(blk, xi);
    CHECK(std::abs(r.symmetrized) <= 1e-12 * r.gain_l1);
  }
  std::vector<double> gp(blk.size()), lo(blk.size()), b(blk.size()), d(blk.size());
  op.gain(blk, gp);
  op.loss(blk, lo);
  const double n = 3.0;
  op.truncated(blk, n, b);
  const double scale = 1.0 + op.velocity_mass(blk) / n;
  for (std::size_t i = 0; i < blk.size(); ++i) CHECK(b[i] == doctest::Approx((gp[i] - lo[i]) / scale).epsilon(1e-12));
  op.dissipation_density(blk, n, d);
  for (double x : d) CHECK(x >= 0.0);
}

TEST_CASE("loss term equals f times the convolution with bbar") {
  KernelSpec ks;
  ks.radius = 6.0;
  ks.n_theta = 8;
  const CollisionOperator op(CollisionKernel(ks), VelocityGrid{2, 8, 4.0});
  const PhaseGrid g{1, 8, 2.0 * kPi, 4.0};
  const DistributionField f = test::lobes(g, 5);
  const auto blk = f.block(0);
  std::vector<double> lo(blk.size());
  op.loss(blk, lo);
  const int n = 8;
  const double h2 = op.grid().cell();
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double acc = 0.0;
      for (int c = 0; c < n; ++c)
        for (int e = 0; e < n; ++e) acc += op.lattice_bbar(a - c, b - e) * blk[c * n + e] * h2;
      CHECK(lo[a * n + b] == doctest::Approx(blk[a * n + b] * acc).epsilon(1e-12));
    }
}

TEST_CASE("in one dimension collisions only exchange velocities") {
  KernelSpec ks;
  ks.radius = 6.0;
  const CollisionOperator op(CollisionKernel(ks), VelocityGrid{1, 20, 4.0});
  std::vector<double> f(20), b(20);
  for (int i = 0; i < 20; ++i) f[i] = counter_uniform(77, i, 0, 0);
  op.truncated(f, kNoTruncation, b);
  for (double x : b) CHECK(std::abs(x) < 1e-14);
}

TEST_CASE("arkeryd gap vanishes in pairwise form") {
  KernelSpec ks;
  ks.radius = 6.0;
  const CollisionOperator op(CollisionKernel(ks), VelocityGrid{2, 12, 4.0});
  const PhaseGrid g{1, 12, 2.0 * kPi, 4.0};
  const DistributionField f = test::lobes(g, 2);
  for (double K : {1.5, 2.0, 10.0}) CHECK(arkeryd_gap(f, op, K) <= 1e-12 * sup_norm(eval_gain(f, op)));
}
