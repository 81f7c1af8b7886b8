#pragma once

#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "kspde/common.hpp"
#include "kspde/phase_field.hpp"

namespace kspde {

struct KernelSpec {
  enum class Kind { kPseudoMaxwellian, kMollifiedHardSphere };
  Kind kind = Kind::kPseudoMaxwellian;
  double b0 = 1.0;
  double radius = 4.0;  ///< R_b: b vanishes for |z| >= R_b
  int n_theta = 8;      ///< angular nodes on S^1 (even)
};

/// Smooth cutoff: 1 on [0, 1/2], 0 on [1, inf), C-infinity in between.
double smooth_cutoff(double s);

/// Collision kernel b(|z|, |z . theta|) with compact support in |z|.
class CollisionKernel {
 public:
  CollisionKernel() = default;
  explicit CollisionKernel(KernelSpec spec);

  const KernelSpec& spec() const { return spec_; }
  double b(double z_abs, double z_dot_theta_abs) const;
  /// Closed form of bbar(z) = integral over the sphere S^{d-1} of b (counting measure for d = 1).
  double bbar_exact(double z_abs, int dim = 2) const;
  /// Direct angular quadrature with n uniform nodes (d = 2).
  double bbar_quadrature(double z_abs, int n) const;
  /// Radial table lookup (linear interpolation on a fine table built by quadrature).
  double bbar(double z_abs) const;
  /// sup of bbar over |z| (d = 2), from the table.
  double bbar_sup() const { return bbar_sup_; }

 private:
  KernelSpec spec_;
  std::vector<double> table_;
  double table_dr_ = 0.0;
  double bbar_sup_ = 0.0;
};

/// Cell-centred velocity grid in dimension 1 or 2.
struct VelocityGrid {
  int dim = 2;
  int n = 16;
  double vmax = 4.0;
  double h() const { return 2.0 * vmax / n; }
  double node(int i) const { return -vmax + (i + 0.5) * h(); }
  std::size_t size() const { return dim == 2 ? static_cast<std::size_t>(n) * n : static_cast<std::size_t>(n); }
  double cell() const { return dim == 2 ? h() * h() : h(); }
  Vec2 point(std::size_t idx) const {
    if (dim == 1) return {node(static_cast<int>(idx)), 0.0};
    return {node(static_cast<int>(idx / n)), node(static_cast<int>(idx % n))};
  }
};

inline constexpr double kLogFloor = 1e-300;

struct InvariantResidual {
  double direct = 0.0;       ///< sum_v xi(v) B(v) h^d
  double symmetrized = 0.0;  ///< 1/4 sum (f'f'_* - f f_*)(xi_* + xi - xi' - xi'_*) b
  double gain_l1 = 0.0;      ///< ||B+||_{L1}, for scaling
};

/// Quadrature form of the Boltzmann operator on one velocity block.
/// Uniform angles with weights 2 pi / N_theta; theta and -theta are folded
/// (they give the same post-collision pair). Values off the grid are bilinear
/// interpolants of f extended by zero outside the box. In d = 1 the sphere is
/// {-1, +1} with unit weights.
class CollisionOperator {
 public:
  CollisionOperator(const CollisionKernel& kernel, VelocityGrid grid);

  const VelocityGrid& grid() const { return grid_; }
  const CollisionKernel& kernel() const { return kernel_; }
  /// Lattice b-bar, computed with the same angular sum as the gain term.
  double lattice_bbar(int a, int b) const;
  double bbar_sup() const { return lattice_bbar_sup_; }

  double velocity_mass(std::span<const double> f) const;
  void gain(std::span<const double> f, std::span<double> out) const;
  void loss(std::span<const double> f, std::span<double> out) const;
  /// B_n = (B+ - B-) / (1 + <f>/n); n = infinity gives the plain operator.
  void truncated(std::span<const double> f, double n, std::span<double> out) const;
  /// Pair sum E(v) = sum_{v_*, theta} (P - Q) log(P / Q) b w h^d, P = f'f'_*, Q = f f_*.
  void pair_dissipation(std::span<const double> f, std::span<double> out) const;
  /// D0_n(v) = 1/4 (1 + <f>/n)^{-1} E(v).
  void dissipation_density(std::span<const double> f, double n, std::span<double> out) const;
  InvariantResidual invariant_residual(std::span<const double> f, const std::function<double(const Vec2&)>& xi) const;

  std::size_t num_entries() const { return entries_.size(); }

 private:
  struct Entry {
    double omega;          // b * folded angular weight * h^d
    double w1[4];          // bilinear weights for v'
    double w2[4];          // ... and for v'_*
    std::ptrdiff_t s1[4];  // padded-buffer offsets
    std::ptrdiff_t s2[4];
    double d1[2], d2[2];   // exact offsets (index units) of v' and v'_*
  };
  struct Group {
    int a, b;  // lattice z in index units
    std::size_t first, count;
  };

  void fill_padded(std::span<const double> f, std::vector<double>& buf) const;
  template <class Fn>
  void for_each_pair(const std::vector<double>& buf, Fn&& fn) const;

  CollisionKernel kernel_;
  VelocityGrid grid_;
  int n1_ = 0, n2_ = 0;     // block shape
  int p1_ = 0, p2_ = 0;     // pads
  int w2_ = 0;              // padded row length
  std::vector<Entry> entries_;
  std::vector<Group> groups_;
  std::vector<double> lattice_bbar_;  // (2 n1 - 1) x (2 n2 - 1)
  double lattice_bbar_sup_ = 0.0;
};

// Phase-field level helpers: the block operator applied at every position node.
DistributionField eval_gain(const DistributionField& f, const CollisionOperator& op);
DistributionField eval_loss(const DistributionField& f, const CollisionOperator& op);
DistributionField eval_truncated(const DistributionField& f, const CollisionOperator& op, double n);

struct DissipationField {
  DistributionField density;  ///< D0_n(x, v)
  double total = 0.0;         ///< D_n = integral over x and v
};
DissipationField entropy_dissipation(const DistributionField& f, const CollisionOperator& op, double n);

enum class ArkerydForm {
  kQuarter,   ///< uses D0 (with its 1/4)
  kPairwise,  ///< uses the pair sum E = 4 D0
};
/// max over (x, v) of [B+ - K B- - D / log K]_+ with D chosen by `form`.
double arkeryd_gap(const DistributionField& f, const CollisionOperator& op, double K,
                   ArkerydForm form = ArkerydForm::kPairwise);
double arkeryd_gap_block(std::span<const double> f, const CollisionOperator& op, double K, ArkerydForm form);

inline constexpr double kNoTruncation = std::numeric_limits<double>::infinity();

}  // namespace kspde
