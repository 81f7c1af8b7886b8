#include "kspde/noise_model.hpp"

#include <algorithm>
#include <string>

namespace kspde {

StreamFunction::Jet StreamFunction::jet(const Vec2& v) const {
  Jet j;
  const Vec2 d{v[0] - center[0], v[1] - center[1]};
  const double w2 = width * width;
  const double q = dot(d, d) / w2;
  if (q >= 1.0) return j;
  const double k = (kind == Kind::kGaussTapered) ? kappa : 0.0;
  const double s = 1.0 / (1.0 - q);
  const double F = std::exp(1.0 - k * q - s);
  const double p1 = -k - s * s;        // phi'
  const double p2 = -2.0 * s * s * s;  // phi''
  const double F1 = F * p1;
  const double F2 = F * (p1 * p1 + p2);
  const Vec2 dq{2.0 * d[0] / w2, 2.0 * d[1] / w2};
  j.value = F;
  j.grad = {F1 * dq[0], F1 * dq[1]};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) j.hess[a][b] = F2 * dq[a] * dq[b] + (a == b ? F1 * 2.0 / w2 : 0.0);
  return j;
}

NoiseModel NoiseModel::make_stream_noise(std::span<const NoiseMode> modes, const PhaseGrid& grid) {
  grid.validate();
  NoiseModel m;
  m.lx_ = grid.lx;
  m.vmax_ = grid.vmax;
  const double limit = grid.vmax - 2.0 * grid.hv();
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const NoiseMode& md = modes[k];
    if (!(md.stream.width > 0.0)) throw ValidationError("noise mode " + std::to_string(k) + ": width must be positive");
    for (int a = 0; a < 2; ++a) {
      if (std::abs(md.stream.center[a]) + md.stream.width > limit + 1e-12) {
        throw ValidationError("noise mode " + std::to_string(k) +
                              ": stream support |c| + w exceeds vmax - 2 hv = " + std::to_string(limit));
      }
    }
  }
  m.modes_.assign(modes.begin(), modes.end());
  return m;
}

NoiseModel NoiseModel::constant_for_testing(std::vector<Vec2> fields) {
  NoiseModel m;
  m.constant_ = true;
  m.fields_ = std::move(fields);
  return m;
}

double NoiseModel::spatial(std::size_t k, const Vec2& x) const {
  const NoiseMode& md = modes_[k];
  return md.amplitude * std::cos(2.0 * kPi * (md.kx[0] * x[0] + md.kx[1] * x[1]) / lx_ + md.phase);
}

Vec2 NoiseModel::spatial_grad(std::size_t k, const Vec2& x) const {
  const NoiseMode& md = modes_[k];
  const double w = 2.0 * kPi / lx_;
  const double s = -md.amplitude * std::sin(w * (md.kx[0] * x[0] + md.kx[1] * x[1]) + md.phase);
  return {s * w * md.kx[0], s * w * md.kx[1]};
}

Vec2 NoiseModel::sigma(std::size_t k, const Vec2& x, const Vec2& v) const {
  if (constant_) return fields_[k];
  const double c = spatial(k, x);
  if (c == 0.0) return {0.0, 0.0};
  const StreamFunction::Jet j = modes_[k].stream.jet(v);
  return {-c * j.grad[1], c * j.grad[0]};
}

void NoiseModel::sigma_jet(std::size_t k, const Vec2& x, const Vec2& v, Vec2& s, Mat2& ds) const {
  if (constant_) {
    s = fields_[k];
    ds = Mat2{};
    return;
  }
  const double c = spatial(k, x);
  const StreamFunction::Jet j = modes_[k].stream.jet(v);
  s = {-c * j.grad[1], c * j.grad[0]};
  ds[0] = {-c * j.hess[1][0], -c * j.hess[1][1]};
  ds[1] = {c * j.hess[0][0], c * j.hess[0][1]};
}

Vec2 NoiseModel::forcing(const Vec2& x, const Vec2& v, const double* w) const {
  Vec2 out{0.0, 0.0};
  const std::size_t K = num_modes();
  for (std::size_t k = 0; k < K; ++k) {
    if (w[k] == 0.0) continue;
    const Vec2 s = sigma(k, x, v);
    out[0] += s[0] * w[k];
    out[1] += s[1] * w[k];
  }
  return out;
}

Vec2 NoiseModel::ito_drift(const Vec2& x, const Vec2& v) const {
  Vec2 h{0.0, 0.0};
  for (std::size_t k = 0; k < num_modes(); ++k) {
    Vec2 s;
    Mat2 ds;
    sigma_jet(k, x, v, s, ds);
    h[0] += 0.5 * (ds[0][0] * s[0] + ds[0][1] * s[1]);
    h[1] += 0.5 * (ds[1][0] * s[0] + ds[1][1] * s[1]);
  }
  return h;
}

Mat2 NoiseModel::diffusion(const Vec2& x, const Vec2& v) const {
  Mat2 a{};
  for (std::size_t k = 0; k < num_modes(); ++k) {
    const Vec2 s = sigma(k, x, v);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) a[i][j] += 0.5 * s[i] * s[j];
  }
  return a;
}

double NoiseModel::generator(const Vec2& x, const Vec2& v, const Vec2& grad_phi, const Mat2& hess_phi) const {
  const Vec2 h = ito_drift(x, v);
  const Mat2 a = diffusion(x, v);
  double acc = dot(h, grad_phi);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) acc += a[i][j] * hess_phi[i][j];
  return acc;
}

double NoiseModel::energy_drift_density(const Vec2& x, const Vec2& v) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < num_modes(); ++k) {
    Vec2 s;
    Mat2 ds;
    sigma_jet(k, x, v, s, ds);
    const Vec2 g{ds[0][0] * s[0] + ds[0][1] * s[1], ds[1][0] * s[0] + ds[1][1] * s[1]};
    acc += dot(v, g) + dot(s, s);
  }
  return acc;
}

ColoringReport NoiseModel::coloring_report(const PhaseGrid& grid) const {
  ColoringReport r;
  const std::size_t K = num_modes();
  const double dvol = grid.cell_volume();
  double h3_sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    double sup_s = 0.0, sup_ds = 0.0, w13 = 0.0, w12 = 0.0;
    auto transport_term = [&](const Vec2& x, const Vec2& v) {
      Vec2 s;
      Mat2 ds;
      sigma_jet(k, x, v, s, ds);
      return Vec2{ds[0][0] * s[0] + ds[0][1] * s[1], ds[1][0] * s[0] + ds[1][1] * s[1]};
    };
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const PhasePoint p = grid.node(i);
      Vec2 s;
      Mat2 ds;
      sigma_jet(k, p.x, p.v, s, ds);
      const double s2 = dot(s, s);
      double dv2 = 0.0;
      for (auto& row : ds)
        for (double e : row) dv2 += e * e;
      sup_s = std::max(sup_s, s2);
      sup_ds = std::max(sup_ds, dv2);
      // x-derivatives: grad_x c times grad_perp psi
      double dx2 = 0.0;
      if (!constant_) {
        const Vec2 gc = spatial_grad(k, p.x);
        const StreamFunction::Jet j = modes_[k].stream.jet(p.v);
        const Vec2 gp{-j.grad[1], j.grad[0]};
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) dx2 += gp[a] * gp[a] * gc[b] * gc[b];
      }
      const double grad_full = std::sqrt(dv2 + dx2);
      w13 += std::pow(std::sqrt(s2), 3) + std::pow(grad_full, 3);
      // W^{1,2} of (sigma . grad_v) sigma with central differences in all four directions.
      const Vec2 g = transport_term(p.x, p.v);
      double dg2 = 0.0;
      const double eps = 1e-5;
      for (int dir = 0; dir < 4; ++dir) {
        PhasePoint a = p, b = p;
        if (dir < 2) { a.x[dir] += eps; b.x[dir] -= eps; } else { a.v[dir - 2] += eps; b.v[dir - 2] -= eps; }
        const Vec2 ga = transport_term(a.x, a.v), gb = transport_term(b.x, b.v);
        for (int c = 0; c < 2; ++c) {
          const double d = (ga[c] - gb[c]) / (2.0 * eps);
          dg2 += d * d;
        }
      }
      w12 += dot(g, g) + dg2;
    }
    r.h1 += sup_s;
    r.h2 += sup_ds;
    const double n13 = std::cbrt(w13 * dvol);
    h3_sum += n13 * n13;
    r.h4 += std::sqrt(w12 * dvol);
  }
  r.h3 = std::sqrt(h3_sum);
  return r;
}

}  // namespace kspde
