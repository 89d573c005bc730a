#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "sphlang/errors.hpp"
#include "sphlang/random.hpp"
#include "sphlang/sphere.hpp"

namespace sphlang {

/// Time average of theta theta^T. Symmetric PSD with unit trace.
struct AveragedSecondMoment {
  Matrix matrix;
  double total_time = 0.0;
};

enum class Symmetry { signed_value, absolute };

/// u . v, or |u . v| when the model cannot tell theta* from -theta*.
inline double correlation(const UnitVector& u, const UnitVector& v, Symmetry symmetry = Symmetry::signed_value) {
  if (u.dim() != v.dim()) throw ShapeError("correlation: dimension mismatch");
  const double c = u.dot(v);
  return symmetry == Symmetry::absolute ? std::abs(c) : c;
}

struct EigenPair {
  UnitVector vector;
  double eigenvalue;
  double gap_estimate;  // eigenvalue minus the deflated leading eigenvalue
  int iterations;
  bool converged;
};

inline int default_power_iterations(Eigen::Index d) {
  const double dd = static_cast<double>(std::max<Eigen::Index>(d, 2));
  return static_cast<int>(std::ceil(10.0 * dd * std::log(dd)));
}

namespace detail {

struct PowerResult {
  Vector vector;
  double rayleigh;
  int iterations;
  bool converged;
};

inline PowerResult power_iterate(const Matrix& m, Vector v, double tol, int max_iter) {
  v.normalize();
  double lambda = v.dot(m * v);
  Vector w(v.size());
  for (int it = 1; it <= max_iter; ++it) {
    w.noalias() = m * v;
    const double norm = w.norm();
    if (!(norm > 0.0)) return {v, 0.0, it, true};  // v lies in the null space
    v = w / norm;
    w.noalias() = m * v;
    const double next = v.dot(w);
    // Rayleigh quotient settled and the eigen-residual is small.
    if (std::abs(next - lambda) <= tol * std::abs(next) && (w - next * v).norm() <= tol * std::abs(next)) {
      return {v, next, it, true};
    }
    lambda = next;
  }
  return {v, lambda, max_iter, false};
}

}  // namespace detail

/// Leading eigenpair by power iteration from a seeded random start.
/// Stops when the Rayleigh quotient changes by <= tol relative and
/// ||M v - lambda v|| <= tol |lambda|. Does not throw on non-convergence;
/// check `converged`.
inline EigenPair power_iteration(const Matrix& m, double tol, int max_iter, std::uint64_t seed = 0) {
  if (m.rows() != m.cols()) throw ShapeError("power_iteration: matrix must be square");
  if (max_iter < 1) throw ShapeError("power_iteration: max_iter must be >= 1");
  RandomStream rng(seed);
  const detail::PowerResult top = detail::power_iterate(m, rng.normal_vector(m.rows()), tol, max_iter);
  // One deflated sweep for the gap.
  const Matrix deflated = m - top.rayleigh * top.vector * top.vector.transpose();
  const detail::PowerResult second = detail::power_iterate(deflated, rng.normal_vector(m.rows()), tol, max_iter);
  return {UnitVector(top.vector), top.rayleigh, top.rayleigh - second.rayleigh, top.iterations, top.converged};
}

/// As power_iteration, but throws ConvergenceError carrying the last Rayleigh
/// quotient when max_iter is exhausted (a near-degenerate spectrum).
inline EigenPair top_eigenvector(const AveragedSecondMoment& m, double tol = 1e-10, int max_iter = 0,
                                 std::uint64_t seed = 0) {
  if (max_iter == 0) max_iter = default_power_iterations(m.matrix.rows());
  const Matrix& a = m.matrix;
  if (a.rows() != a.cols()) throw ShapeError("top_eigenvector: matrix must be square");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff())) {
    throw ShapeError("top_eigenvector: matrix is not symmetric");
  }
  EigenPair pair = power_iteration(a, tol, max_iter, seed);
  if (!pair.converged) {
    throw ConvergenceError("power iteration did not converge in " + std::to_string(max_iter) +
                               " iterations (last Rayleigh quotient " + std::to_string(pair.eigenvalue) + ")",
                           pair.eigenvalue);
  }
  return pair;
}

}  // namespace sphlang
