#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace kspde {

using Vec2 = std::array<double, 2>;
/// Row-major 2x2 matrix, m[i][j].
using Mat2 = std::array<std::array<double, 2>, 2>;

inline constexpr double kPi = 3.14159265358979323846;

/// Bad user input: malformed config, out-of-range parameter, missing file.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A numerical invariant was broken at run time (trajectory left the box,
/// Picard iteration stopped contracting, ...).
struct InvariantViolation : std::runtime_error {
  InvariantViolation(std::string what, std::string kind_)
      : std::runtime_error(std::move(what)), kind(std::move(kind_)) {}
  std::string kind;
};

struct PhasePoint {
  Vec2 x{0.0, 0.0};
  Vec2 v{0.0, 0.0};
};

inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(const Vec2& a) { return std::sqrt(dot(a, a)); }

/// Step index for time t on a grid of spacing dt; throws unless aligned.
inline int aligned_step(double t, double dt, const char* what) {
  const double r = t / dt;
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-7 || k < 0) {
    throw ValidationError(std::string(what) + " = " + std::to_string(t) +
                          " is not aligned to dt = " + std::to_string(dt));
  }
  return static_cast<int>(k);
}

}  // namespace kspde
