#include <doctest.h>

#include "helpers.hpp"
#include "kspde/observables.hpp"
#include "kspde/renorm_va.hpp"

using namespace kspde;

namespace {

// Spatially homogeneous data with no noise: the Duhamel iteration reduces to
// forward Euler for dF/dt = B_n(F) on a single velocity block.
struct Homogeneous {
  PhaseGrid g{2, 12, 2.0 * kPi, 4.0};
  KernelSpec ks;
  CollisionKernel kernel;
  CollisionOperator op;
  NoiseModel model;
  DistributionField f0;

  Homogeneous()
      : ks{KernelSpec::Kind::kPseudoMaxwellian, 0.5, 6.0, 8},
        kernel(ks),
        op(kernel, VelocityGrid{2, 12, 4.0}),
        model(NoiseModel::make_stream_noise(test::zero_noise(), g)),
        f0(g) {
    const PhaseGrid one{1, 12, 2.0 * kPi, 4.0};
    const DistributionField blk = test::lobes(one, 8);
    for (std::size_t ix = 0; ix < g.num_x(); ++ix)
      for (std::size_t j = 0; j < g.block(); ++j) f0.block(ix)[j] = blk[j] * 0.2;
  }
};

}  // namespace

TEST_CASE("picard solve of homogeneous data is forward Euler") {
  Homogeneous h;
  const double dt = 0.02, T = 0.2, n = 10.0;
  const int N = 10;
  const BrownianPath path = BrownianPath::sample(1, dt, N, 2);
  PicardOptions po;
  po.tol = 1e-13;
  po.max_iter = 40;
  const Trajectory tr = picard_solve(h.f0, h.op, n, h.model, path, T, po);
  REQUIRE(tr.size() == static_cast<std::size_t>(N + 1));
  std::vector<double> F(h.f0.block(0).begin(), h.f0.block(0).end()), b(F.size());
  for (int j = 0; j < N; ++j) {
    h.op.truncated(F, n, b);
    for (std::size_t i = 0; i < F.size(); ++i) F[i] += dt * b[i];
  }
  const auto last = tr.fields.back().block(3);
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < F.size(); ++i) {
    err = std::max(err, std::abs(last[i] - F[i]));
    ref = std::max(ref, std::abs(F[i]));
  }
  CHECK(err <= 1e-9 * ref);
  for (const auto& w : tr.windows) CHECK(w.iterations <= po.max_iter);
}

TEST_CASE("pure transport of x-independent data without noise is stationary") {
  Homogeneous h;
  const BrownianPath path = BrownianPath::sample(1, 0.05, 4, 2);
  const Trajectory tr = solve_transport(h.f0, {}, h.model, path, 0.2);
  // Free streaming shifts x only; the data do not depend on x.
  for (std::size_t i = 0; i < h.f0.values().size(); ++i) CHECK(tr.fields.back()[i] == doctest::Approx(h.f0[i]).epsilon(1e-13));
}

TEST_CASE("weak residual vanishes for a stationary solution") {
  Homogeneous h;
  const BrownianPath path = BrownianPath::sample(1, 0.05, 4, 2);
  const Trajectory tr = solve_transport(h.f0, {}, h.model, path, 0.2);
  TestFunction phi;
  phi.k = {1, 0};
  phi.radius = 1.5;
  for (const auto& g : {Renormalization::identity(), Renormalization::gamma(4.0), Renormalization::beta(0.5)}) {
    for (double r : weak_residual(tr, g, phi, nullptr, kNoTruncation, h.model, path)) CHECK(std::abs(r) < 1e-12);
  }
}

TEST_CASE("renormalizations") {
  for (double m : {1.0, 4.0, 64.0}) {
    for (double z : {0.0, 0.1, 1.0, 10.0, 1e4}) {
      CHECK(gamma_m(z, m) <= z);
      CHECK(gamma_m(z, m) < m + 1e-12);
      const double h = 1e-6 * (1.0 + z);
      CHECK(gamma_m_prime(z, m) == doctest::Approx((gamma_m(z + h, m) - gamma_m(std::max(0.0, z - h), m)) /
                                                   (z + h - std::max(0.0, z - h)))
                                       .epsilon(1e-5));
    }
  }
  const Renormalization b = Renormalization::beta(0.5);
  CHECK(b.admissibility_sup() < 10.0);
  CHECK_THROWS_AS(Renormalization::gamma(0.5), ValidationError);
}

TEST_CASE("truncation gap bound") {
  const PhaseGrid g{2, 8, 2.0 * kPi, 4.0};
  DistributionField f(g);
  for (std::size_t i = 0; i < g.size(); ++i) f[i] = 20.0 * std::pow(counter_uniform(3, i, 0, 0), 3);
  double prev = std::numeric_limits<double>::infinity();
  for (double m : {1.0, 4.0, 16.0, 64.0, 256.0}) {
    const GapBound b = renorm_gap_bound(f, m);
    CHECK(b.holds());
    CHECK(b.lhs < prev);
    prev = b.lhs;
  }
}

TEST_CASE("commutators vanish for constant fields and constant noise") {
  const PhaseGrid g{2, 32, 2.0 * kPi, 4.0};
  const DistributionField f = SimConfig::standard().f0.sample(g);
  const std::vector<double> eps = {4 * g.hv(), 8 * g.hv()};
  const CommutatorReport c = commutator_norms(f, NoiseModel::constant_for_testing({{0.7, -0.1}}), eps);
  for (double x : c.single_l2) CHECK(x < 1e-10);
  for (double x : c.double_l1) CHECK(x < 1e-10);
  const CommutatorReport s = commutator_norms(f, SimConfig::standard().noise_model(), eps);
  CHECK(s.single_l2[0] > 1e-6);
  CHECK(s.single_l2[0] < s.single_l2[1]);
}

TEST_CASE("velocity averaging: Parseval for the unit weight") {
  const PhaseGrid g{8, 8, 2.0 * kPi, 4.0};
  std::vector<std::vector<double>> rho(3, std::vector<double>(g.num_x()));
  double direct = 0.0;
  for (int t = 0; t < 3; ++t)
    for (std::size_t i = 0; i < g.num_x(); ++i) {
      rho[t][i] = counter_normal(5, t, i, 0);
      direct += 0.1 * rho[t][i] * rho[t][i] * g.hx() * g.hx();
    }
  CHECK(h16_lhs(g, rho, 0.1, true) == doctest::Approx(direct).epsilon(1e-13));
  CHECK(h16_lhs(g, rho, 0.1, false) > direct);
  // Constant rho puts everything in the zero mode, where the weight is 1.
  std::vector<std::vector<double>> c(1, std::vector<double>(g.num_x(), 2.0));
  CHECK(h16_lhs(g, c, 1.0, false) == doctest::Approx(4.0 * g.lx * g.lx).epsilon(1e-13));
}

TEST_CASE("statistics helpers") {
  const MeanSe m = mean_se({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == doctest::Approx(2.5));
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(loglog_slope({1.0, 2.0, 4.0}, {3.0, 12.0, 48.0}) == doctest::Approx(2.0));
  CHECK(loglog_slope({1.0, 2.0, 4.0}, {0.0, 1.0, 2.0}) == doctest::Approx(1.0));
}

TEST_CASE("balance report of a collisionless run conserves mass") {
  const SimConfig c = SimConfig::coarse();
  const NoiseModel m = c.noise_model();
  const BrownianPath path = BrownianPath::sample(5, c.dt, c.n_steps(), 2);
  const Trajectory tr = solve_transport(c.f0.sample(c.grid), {}, m, path, c.T);
  const BalanceReport r = balance_report(tr, m, path);
  REQUIRE(r.has_integrals());
  CHECK(r.finite());
  CHECK(std::abs(r.mass_residual.back()) < 0.05 * r.mass.front());
  CHECK(r.collision_mass.back() == 0.0);
  CHECK(r.entropy_residual.front() == 0.0);
}
