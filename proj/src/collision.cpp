#include "kspde/collision.hpp"

#include <algorithm>
#include <string>

namespace kspde {

double smooth_cutoff(double s) {
  if (s <= 0.5) return 1.0;
  if (s >= 1.0) return 0.0;
  const double t = (1.0 - s) / 0.5;  // 1 at s = 1/2, 0 at s = 1
  const double a = std::exp(-1.0 / t);
  const double b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

CollisionKernel::CollisionKernel(KernelSpec spec) : spec_(spec) {
  if (spec_.b0 < 0.0) throw ValidationError("kernel: b0 must be nonnegative");
  if (!(spec_.radius > 0.0)) throw ValidationError("kernel: R_b must be positive");
  if (spec_.n_theta < 2 || spec_.n_theta % 2 != 0) throw ValidationError("kernel: N_theta must be even and >= 2");
  const int nt = 2048;
  table_dr_ = spec_.radius / nt;
  table_.resize(nt + 1);
  for (int i = 0; i <= nt; ++i) {
    table_[i] = bbar_quadrature(i * table_dr_, 1440);
    bbar_sup_ = std::max(bbar_sup_, table_[i]);
  }
}

double CollisionKernel::b(double z_abs, double z_dot_theta_abs) const {
  const double chi = smooth_cutoff(z_abs / spec_.radius);
  if (chi == 0.0) return 0.0;
  switch (spec_.kind) {
    case KernelSpec::Kind::kPseudoMaxwellian:
      return spec_.b0 * chi;
    case KernelSpec::Kind::kMollifiedHardSphere:
      return spec_.b0 * z_dot_theta_abs * chi;
  }
  return 0.0;
}

double CollisionKernel::bbar_exact(double z_abs, int dim) const {
  const double chi = smooth_cutoff(z_abs / spec_.radius);
  const bool hs = spec_.kind == KernelSpec::Kind::kMollifiedHardSphere;
  if (dim == 1) return 2.0 * spec_.b0 * chi * (hs ? z_abs : 1.0);
  return spec_.b0 * chi * (hs ? 4.0 * z_abs : 2.0 * kPi);
}

double CollisionKernel::bbar_quadrature(double z_abs, int n) const {
  double acc = 0.0;
  const double w = 2.0 * kPi / n;
  for (int j = 0; j < n; ++j) acc += b(z_abs, std::abs(z_abs * std::cos(2.0 * kPi * j / n))) * w;
  return acc;
}

double CollisionKernel::bbar(double z_abs) const {
  if (z_abs >= spec_.radius) return 0.0;
  const double s = z_abs / table_dr_;
  const std::size_t i = static_cast<std::size_t>(s);
  if (i + 1 >= table_.size()) return table_.back();
  const double a = s - i;
  return (1.0 - a) * table_[i] + a * table_[i + 1];
}

// ---------------------------------------------------------------------------

CollisionOperator::CollisionOperator(const CollisionKernel& kernel, VelocityGrid grid)
    : kernel_(kernel), grid_(grid) {
  if (grid_.dim != 1 && grid_.dim != 2) throw ValidationError("collision: velocity dimension must be 1 or 2");
  if (grid_.n < 2) throw ValidationError("collision: need at least 2 velocity nodes per axis");
  n1_ = grid_.n;
  n2_ = grid_.dim == 2 ? grid_.n : 1;
  const double h = grid_.h();
  const double hd = grid_.cell();

  // Half set of directions with folded weights.
  std::vector<Vec2> dirs;
  double wfold;
  if (grid_.dim == 1) {
    dirs.push_back({1.0, 0.0});
    wfold = 2.0;
  } else {
    const int nt = kernel_.spec().n_theta;
    for (int j = 0; j < nt / 2; ++j) dirs.push_back({std::cos(2.0 * kPi * j / nt), std::sin(2.0 * kPi * j / nt)});
    wfold = 2.0 * (2.0 * kPi / nt);
  }

  const int na = 2 * n1_ - 1, nb = 2 * n2_ - 1;
  lattice_bbar_.assign(static_cast<std::size_t>(na) * nb, 0.0);
  struct Raw {
    double omega;
    double d1[2], d2[2];
  };
  std::vector<std::pair<std::array<int, 2>, std::vector<Raw>>> raw;
  double maxoff1 = 0.0, maxoff2 = 0.0;
  for (int a = -(n1_ - 1); a <= n1_ - 1; ++a) {
    for (int b = -(n2_ - 1); b <= n2_ - 1; ++b) {
      const double zabs = std::hypot(a, b) * h;
      if (zabs >= kernel_.spec().radius) continue;
      std::vector<Raw> list;
      double bsum = 0.0;
      for (const Vec2& th : dirs) {
        const double zt = a * th[0] + b * th[1];  // index units
        const double bv = kernel_.b(zabs, std::abs(zt) * h);
        if (bv == 0.0) continue;
        bsum += bv * wfold;
        Raw r;
        r.omega = bv * wfold * hd;
        r.d1[0] = -zt * th[0];
        r.d1[1] = -zt * th[1];
        r.d2[0] = -a - r.d1[0];
        r.d2[1] = -b - r.d1[1];
        maxoff1 = std::max({maxoff1, std::abs(r.d1[0]), std::abs(r.d2[0])});
        maxoff2 = std::max({maxoff2, std::abs(r.d1[1]), std::abs(r.d2[1])});
        list.push_back(r);
      }
      lattice_bbar_[static_cast<std::size_t>(a + n1_ - 1) * nb + (b + n2_ - 1)] = bsum;
      lattice_bbar_sup_ = std::max(lattice_bbar_sup_, bsum);
      if (!list.empty()) raw.push_back({{a, b}, std::move(list)});
    }
  }
  p1_ = static_cast<int>(std::ceil(maxoff1)) + 2;
  p2_ = grid_.dim == 2 ? static_cast<int>(std::ceil(maxoff2)) + 2 : 1;
  w2_ = n2_ + 2 * p2_;

  auto stencil = [&](const double d[2], double w[4], std::ptrdiff_t s[4]) {
    const double f1 = std::floor(d[0]), f2 = std::floor(d[1]);
    const double a1 = d[0] - f1, a2 = d[1] - f2;
    const std::ptrdiff_t o1 = static_cast<std::ptrdiff_t>(f1), o2 = static_cast<std::ptrdiff_t>(f2);
    s[0] = o1 * w2_ + o2;
    s[1] = (o1 + 1) * w2_ + o2;
    s[2] = o1 * w2_ + o2 + 1;
    s[3] = (o1 + 1) * w2_ + o2 + 1;
    w[0] = (1.0 - a1) * (1.0 - a2);
    w[1] = a1 * (1.0 - a2);
    w[2] = (1.0 - a1) * a2;
    w[3] = a1 * a2;
  };
  for (auto& [z, list] : raw) {
    Group g{z[0], z[1], entries_.size(), list.size()};
    for (const Raw& r : list) {
      Entry e{};
      e.omega = r.omega;
      std::copy(r.d1, r.d1 + 2, e.d1);
      std::copy(r.d2, r.d2 + 2, e.d2);
      stencil(r.d1, e.w1, e.s1);
      stencil(r.d2, e.w2, e.s2);
      entries_.push_back(e);
    }
    groups_.push_back(g);
  }
}

double CollisionOperator::lattice_bbar(int a, int b) const {
  if (std::abs(a) > n1_ - 1 || std::abs(b) > n2_ - 1) return 0.0;
  return lattice_bbar_[static_cast<std::size_t>(a + n1_ - 1) * (2 * n2_ - 1) + (b + n2_ - 1)];
}

double CollisionOperator::velocity_mass(std::span<const double> f) const {
  double acc = 0.0;
  for (double v : f) acc += v;
  return acc * grid_.cell();
}

void CollisionOperator::fill_padded(std::span<const double> f, std::vector<double>& buf) const {
  if (f.size() != grid_.size()) throw ValidationError("collision: block size does not match velocity grid");
  buf.assign(static_cast<std::size_t>(n1_ + 2 * p1_) * w2_, 0.0);
  for (int i = 0; i < n1_; ++i)
    std::copy(f.begin() + static_cast<std::ptrdiff_t>(i) * n2_, f.begin() + static_cast<std::ptrdiff_t>(i + 1) * n2_,
              buf.begin() + static_cast<std::ptrdiff_t>(i + p1_) * w2_ + p2_);
}

void CollisionOperator::gain(std::span<const double> f, std::span<double> out) const {
  std::vector<double> buf;
  fill_padded(f, buf);
  std::fill(out.begin(), out.end(), 0.0);
  const double* F = buf.data();
  for (const Group& g : groups_) {
    const int ilo = std::max(0, g.a), ihi = std::min(n1_, n1_ + g.a);
    const int jlo = std::max(0, g.b), jhi = std::min(n2_, n2_ + g.b);
    for (int i = ilo; i < ihi; ++i) {
      const double* row = F + static_cast<std::ptrdiff_t>(i + p1_) * w2_ + p2_;
      double* o = out.data() + static_cast<std::ptrdiff_t>(i) * n2_;
      for (std::size_t e = g.first; e < g.first + g.count; ++e) {
        const Entry& E = entries_[e];
        const double om = E.omega;
        const double a0 = E.w1[0], a1 = E.w1[1], a2 = E.w1[2], a3 = E.w1[3];
        const double b0 = E.w2[0], b1 = E.w2[1], b2 = E.w2[2], b3 = E.w2[3];
        const double* p0 = row + E.s1[0];
        const double* p1 = row + E.s1[1];
        const double* p2 = row + E.s1[2];
        const double* p3 = row + E.s1[3];
        const double* q0 = row + E.s2[0];
        const double* q1 = row + E.s2[1];
        const double* q2 = row + E.s2[2];
        const double* q3 = row + E.s2[3];
        for (int j = jlo; j < jhi; ++j) {
          const double fp = a0 * p0[j] + a1 * p1[j] + a2 * p2[j] + a3 * p3[j];
          const double fq = b0 * q0[j] + b1 * q1[j] + b2 * q2[j] + b3 * q3[j];
          o[j] += om * fp * fq;
        }
      }
    }
  }
}

void CollisionOperator::loss(std::span<const double> f, std::span<double> out) const {
  if (f.size() != grid_.size()) throw ValidationError("collision: block size does not match velocity grid");
  const double hd = grid_.cell();
  const int nb = 2 * n2_ - 1;
  for (int i = 0; i < n1_; ++i) {
    for (int j = 0; j < n2_; ++j) {
      const double fv = f[static_cast<std::size_t>(i) * n2_ + j];
      if (fv == 0.0) {
        out[static_cast<std::size_t>(i) * n2_ + j] = 0.0;
        continue;
      }
      double acc = 0.0;
      for (int k = 0; k < n1_; ++k) {
        const double* brow = lattice_bbar_.data() + static_cast<std::size_t>(i - k + n1_ - 1) * nb + (j + n2_ - 1);
        const double* frow = f.data() + static_cast<std::size_t>(k) * n2_;
        for (int l = 0; l < n2_; ++l) acc += brow[-l] * frow[l];
      }
      out[static_cast<std::size_t>(i) * n2_ + j] = fv * acc * hd;
    }
  }
}

void CollisionOperator::truncated(std::span<const double> f, double n, std::span<double> out) const {
  std::vector<double> lo(f.size());
  gain(f, out);
  loss(f, lo);
  const double m = velocity_mass(f);
  const double factor = std::isinf(n) ? 1.0 : 1.0 / (1.0 + m / n);
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = (out[i] - lo[i]) * factor;
}

template <class Fn>
void CollisionOperator::for_each_pair(const std::vector<double>& buf, Fn&& fn) const {
  const double* F = buf.data();
  for (const Group& g : groups_) {
    const int ilo = std::max(0, g.a), ihi = std::min(n1_, n1_ + g.a);
    const int jlo = std::max(0, g.b), jhi = std::min(n2_, n2_ + g.b);
    const std::ptrdiff_t sstar = -(static_cast<std::ptrdiff_t>(g.a) * w2_ + g.b);
    for (int i = ilo; i < ihi; ++i) {
      const double* row = F + static_cast<std::ptrdiff_t>(i + p1_) * w2_ + p2_;
      for (std::size_t e = g.first; e < g.first + g.count; ++e) {
        const Entry& E = entries_[e];
        for (int j = jlo; j < jhi; ++j) {
          const double* c = row + j;
          const double fp = E.w1[0] * c[E.s1[0]] + E.w1[1] * c[E.s1[1]] + E.w1[2] * c[E.s1[2]] + E.w1[3] * c[E.s1[3]];
          const double fq = E.w2[0] * c[E.s2[0]] + E.w2[1] * c[E.s2[1]] + E.w2[2] * c[E.s2[2]] + E.w2[3] * c[E.s2[3]];
          fn(i, j, E, g, fp * fq, c[0] * c[sstar]);
        }
      }
    }
  }
}

void CollisionOperator::pair_dissipation(std::span<const double> f, std::span<double> out) const {
  std::vector<double> buf;
  fill_padded(f, buf);
  std::fill(out.begin(), out.end(), 0.0);
  for_each_pair(buf, [&](int i, int j, const Entry& E, const Group&, double P, double Q) {
    if (P == Q) return;
    const double r = std::max(P, kLogFloor) / std::max(Q, kLogFloor);
    out[static_cast<std::size_t>(i) * n2_ + j] += E.omega * (P - Q) * std::log(r);
  });
}

void CollisionOperator::dissipation_density(std::span<const double> f, double n, std::span<double> out) const {
  pair_dissipation(f, out);
  const double m = velocity_mass(f);
  const double factor = 0.25 * (std::isinf(n) ? 1.0 : 1.0 / (1.0 + m / n));
  for (double& v : out) v *= factor;
}

InvariantResidual CollisionOperator::invariant_residual(std::span<const double> f,
                                                        const std::function<double(const Vec2&)>& xi) const {
  InvariantResidual r;
  std::vector<double> gp(f.size()), lo(f.size());
  gain(f, gp);
  loss(f, lo);
  const double hd = grid_.cell();
  for (std::size_t i = 0; i < f.size(); ++i) {
    r.direct += xi(grid_.point(i)) * (gp[i] - lo[i]) * hd;
    r.gain_l1 += std::abs(gp[i]) * hd;
  }
  std::vector<double> buf;
  fill_padded(f, buf);
  const double h = grid_.h();
  double acc = 0.0;
  for_each_pair(buf, [&](int i, int j, const Entry& E, const Group& g, double P, double Q) {
    if (P == Q) return;
    const Vec2 v{grid_.node(i), grid_.dim == 2 ? grid_.node(j) : 0.0};
    const Vec2 vs{v[0] - g.a * h, v[1] - g.b * h};
    const Vec2 vp{v[0] + E.d1[0] * h, v[1] + E.d1[1] * h};
    const Vec2 vps{v[0] + E.d2[0] * h, v[1] + E.d2[1] * h};
    acc += E.omega * (P - Q) * (xi(vs) + xi(v) - xi(vp) - xi(vps));
  });
  r.symmetrized = 0.25 * acc * hd;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

void check_grid(const DistributionField& f, const CollisionOperator& op) {
  const VelocityGrid& vg = op.grid();
  if (vg.dim != 2 || vg.n != f.grid().nv || std::abs(vg.vmax - f.grid().vmax) > 1e-14) {
    throw ValidationError("collision operator grid does not match the field's velocity grid");
  }
}

template <class Fn>
DistributionField per_block(const DistributionField& f, const CollisionOperator& op, Fn&& fn) {
  check_grid(f, op);
  DistributionField out(f.grid(), f.time());
  for (std::size_t ix = 0; ix < f.grid().num_x(); ++ix) fn(f.block(ix), out.block(ix));
  return out;
}

}  // namespace

DistributionField eval_gain(const DistributionField& f, const CollisionOperator& op) {
  return per_block(f, op, [&](auto in, auto out) { op.gain(in, out); });
}

DistributionField eval_loss(const DistributionField& f, const CollisionOperator& op) {
  return per_block(f, op, [&](auto in, auto out) { op.loss(in, out); });
}

DistributionField eval_truncated(const DistributionField& f, const CollisionOperator& op, double n) {
  return per_block(f, op, [&](auto in, auto out) { op.truncated(in, n, out); });
}

DissipationField entropy_dissipation(const DistributionField& f, const CollisionOperator& op, double n) {
  DissipationField d;
  d.density = per_block(f, op, [&](auto in, auto out) { op.dissipation_density(in, n, out); });
  double acc = 0.0;
  for (double v : d.density.values()) acc += v;
  d.total = acc * f.grid().cell_volume();
  return d;
}

double arkeryd_gap_block(std::span<const double> f, const CollisionOperator& op, double K, ArkerydForm form) {
  if (!(K > 1.0)) throw ValidationError("arkeryd_gap: K must exceed 1");
  std::vector<double> gp(f.size()), lo(f.size()), e(f.size());
  op.gain(f, gp);
  op.loss(f, lo);
  op.pair_dissipation(f, e);
  const double c = (form == ArkerydForm::kQuarter ? 0.25 : 1.0) / std::log(K);
  double gap = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) gap = std::max(gap, gp[i] - K * lo[i] - c * e[i]);
  return gap;
}

double arkeryd_gap(const DistributionField& f, const CollisionOperator& op, double K, ArkerydForm form) {
  check_grid(f, op);
  double gap = 0.0;
  for (std::size_t ix = 0; ix < f.grid().num_x(); ++ix) gap = std::max(gap, arkeryd_gap_block(f.block(ix), op, K, form));
  return gap;
}

}  // namespace kspde
