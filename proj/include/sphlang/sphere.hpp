#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "sphlang/errors.hpp"
#include "sphlang/random.hpp"

namespace sphlang {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kUnitNormTolerance = 1e-9;
inline constexpr double kMinRetractNorm = 1e-300;

/// A point on S^{d-1}. Coordinates are renormalized on construction, so
/// long runs never accumulate norm drift beyond rounding.
class UnitVector {
 public:
  /// Normalizes `coords`; throws DimensionError for d < 2 and
  /// DegenerateError if the norm is (near) zero.
  explicit UnitVector(Vector coords) : coords_(std::move(coords)) {
    if (coords_.size() < 2) {
      throw DimensionError("unit vector needs d >= 2, got d=" + std::to_string(coords_.size()));
    }
    const double norm = coords_.norm();
    if (!(norm > kMinRetractNorm) || !std::isfinite(norm)) {
      throw DegenerateError("cannot normalize a vector with norm " + std::to_string(norm));
    }
    if (std::abs(norm - 1.0) > 0.0) coords_ /= norm;
  }

  /// Standard basis vector e_i in R^d.
  static UnitVector basis(Eigen::Index d, Eigen::Index i) {
    if (i < 0 || i >= d) throw ShapeError("basis index out of range");
    Vector v = Vector::Zero(d);
    v[i] = 1.0;
    return UnitVector(std::move(v));
  }

  const Vector& coords() const noexcept { return coords_; }
  Eigen::Index dim() const noexcept { return coords_.size(); }
  double operator[](Eigen::Index i) const { return coords_[i]; }
  double dot(const UnitVector& other) const { return coords_.dot(other.coords_); }

  /// Exact negation; does not renormalize.
  UnitVector operator-() const {
    UnitVector out = *this;
    out.coords_ = -coords_;
    return out;
  }

 private:
  Vector coords_;
};

/// A vector in the tangent space at `base`.
class TangentVector {
 public:
  const UnitVector& base() const noexcept { return base_; }
  const Vector& coords() const noexcept { return coords_; }
  Eigen::Index dim() const noexcept { return coords_.size(); }
  double norm() const { return coords_.norm(); }

 private:
  TangentVector(UnitVector base, Vector coords) : base_(std::move(base)), coords_(std::move(coords)) {}

  friend TangentVector project_tangent(const UnitVector& base, const Vector& v);

  UnitVector base_;
  Vector coords_;
};

/// P_base^perp v = v - (v . base) base.
inline TangentVector project_tangent(const UnitVector& base, const Vector& v) {
  if (v.size() != base.dim()) {
    throw ShapeError("project_tangent: dimension mismatch (" + std::to_string(v.size()) + " vs " +
                     std::to_string(base.dim()) + ")");
  }
  Vector out = v - v.dot(base.coords()) * base.coords();
  return TangentVector(base, std::move(out));
}

/// Maps a nonzero ambient vector back onto the sphere.
inline UnitVector retract(const Vector& v) {
  const double norm = v.norm();
  if (!(norm > kMinRetractNorm)) {
    throw DegenerateError("degenerate retraction: norm " + std::to_string(norm));
  }
  return UnitVector(v / norm);
}

/// Uniform sample on S^{d-1}: a standard Gaussian draw, normalized.
inline UnitVector sample_uniform(Eigen::Index d, RandomStream& rng) {
  if (d < 2) throw DimensionError("sample_uniform: d must be >= 2, got " + std::to_string(d));
  for (;;) {
    Vector g = rng.normal_vector(d);
    if (g.norm() > kMinRetractNorm) return UnitVector(std::move(g));
  }
}

/// E[z_1^{two_k}] for z uniform on S^{d-1}, i.e. (2k-1)!! / prod_{j<k} (d + 2j).
/// Odd orders return 0 (the moment vanishes by symmetry).
inline double spherical_even_moment(long d, long two_k) {
  if (d < 2) throw DimensionError("spherical_even_moment: d must be >= 2");
  if (two_k < 0) throw ShapeError("spherical_even_moment: order must be >= 0");
  if (two_k % 2 != 0) return 0.0;
  double moment = 1.0;
  for (long j = 0; j < two_k / 2; ++j) {
    moment *= static_cast<double>(2 * j + 1) / static_cast<double>(d + 2 * j);
  }
  return moment;
}

}  // namespace sphlang
