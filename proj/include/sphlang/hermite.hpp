#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sphlang/errors.hpp"

namespace sphlang {

namespace detail {

// sqrt(n) and 1/sqrt(n) for the recurrence, cached once.
struct RecurrenceTable {
  std::vector<double> root;
  std::vector<double> inv_root;
};

inline const RecurrenceTable& recurrence_table() {
  static const RecurrenceTable table = [] {
    RecurrenceTable t;
    t.root.resize(257);
    t.inv_root.resize(257);
    for (std::size_t n = 0; n < t.root.size(); ++n) {
      t.root[n] = std::sqrt(static_cast<double>(n));
      t.inv_root[n] = n == 0 ? 0.0 : 1.0 / t.root[n];
    }
    return t;
  }();
  return table;
}

inline double sqrt_int(int n) {
  const auto& t = recurrence_table().root;
  return static_cast<std::size_t>(n) < t.size() ? t[static_cast<std::size_t>(n)] : std::sqrt(static_cast<double>(n));
}

inline double inv_sqrt_int(int n) {
  const auto& t = recurrence_table().inv_root;
  return static_cast<std::size_t>(n) < t.size() ? t[static_cast<std::size_t>(n)] : 1.0 / std::sqrt(static_cast<double>(n));
}

}  // namespace detail

/// Normalized probabilist Hermite polynomial h_k, E_{z~N(0,1)}[h_k(z)^2] = 1.
///
/// Runs the monic recurrence He_{n+1} = x He_n - n He_{n-1} with the 1/sqrt(n!)
/// scaling folded into each step, which keeps intermediate values O(1).
inline double hermite_eval(int k, double x) {
  if (k < 0) throw ShapeError("hermite_eval: order must be >= 0");
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int n = 1; n < k; ++n) {
    const double next = (x * cur - detail::sqrt_int(n) * prev) * detail::inv_sqrt_int(n + 1);
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Values h_0(x), ..., h_K(x) in one pass.
inline std::vector<double> hermite_all(int K, double x) {
  std::vector<double> h(static_cast<std::size_t>(K) + 1);
  h[0] = 1.0;
  if (K >= 1) h[1] = x;
  for (int n = 1; n < K; ++n) {
    h[n + 1] = (x * h[n] - std::sqrt(static_cast<double>(n)) * h[n - 1]) /
               std::sqrt(static_cast<double>(n + 1));
  }
  return h;
}

/// Gauss-Hermite rule for the standard normal density: sum_i w_i f(x_i) ~ E[f(z)].
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  template <class F>
  double expectation(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

/// Newton iteration on the orthonormal physicist recurrence, seeded with the
/// classical asymptotic initial guesses, then mapped to the probabilist weight.
inline GaussHermiteRule gauss_hermite_rule(int n) {
  if (n < 1) throw ShapeError("gauss_hermite_rule: need at least one node");
  constexpr double kPiM4 = 0.7511255444649425;  // pi^{-1/4}
  std::vector<double> t(static_cast<std::size_t>(n));
  std::vector<double> w(static_cast<std::size_t>(n));
  const int half = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * t[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * t[1];
    } else {
      z = 2.0 * z - t[static_cast<std::size_t>(i - 2)];
    }
    double pp = 0.0;
    for (int it = 0; it < 200; ++it) {
      double p1 = kPiM4;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    t[static_cast<std::size_t>(i)] = z;
    t[static_cast<std::size_t>(n - 1 - i)] = -z;
    w[static_cast<std::size_t>(i)] = 2.0 / (pp * pp);
    w[static_cast<std::size_t>(n - 1 - i)] = w[static_cast<std::size_t>(i)];
  }
  GaussHermiteRule rule;
  rule.nodes.resize(t.size());
  rule.weights.resize(w.size());
  // Ascending nodes; x = sqrt(2) t, w -> w / sqrt(pi).
  for (int i = 0; i < n; ++i) {
    const auto src = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[static_cast<std::size_t>(i)] = std::numbers::sqrt2 * t[src];
    rule.weights[static_cast<std::size_t>(i)] = w[src] / std::sqrt(std::numbers::pi);
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

/// Link function sigma with first and second derivatives.
///
/// Non-Hermite kinds are rescaled to E[sigma(z)^2] = 1 unless constructed with
/// Normalization::raw. Hermite links are unit norm already.
class LinkFunction {
 public:
  enum class Kind { hermite, absolute_value, square, relu, identity, damped_square, polynomial, tabulated };
  enum class Normalization { unit, raw };

  static LinkFunction hermite(int k) {
    if (k < 0) throw ShapeError("hermite link needs k >= 0");
    LinkFunction f(Kind::hermite);
    f.order_ = k;
    return f;
  }
  static LinkFunction identity() { return LinkFunction(Kind::identity); }
  static LinkFunction absolute_value() { return LinkFunction(Kind::absolute_value); }
  static LinkFunction square(Normalization n = Normalization::unit) {
    return with_norm(LinkFunction(Kind::square), 3.0, n);
  }
  static LinkFunction relu(Normalization n = Normalization::unit) {
    return with_norm(LinkFunction(Kind::relu), 0.5, n);
  }
  /// t^2 exp(-t^2); E[t^4 exp(-2t^2)] = 3 / (25 sqrt 5).
  static LinkFunction damped_square(Normalization n = Normalization::unit) {
    return with_norm(LinkFunction(Kind::damped_square), 3.0 / (25.0 * std::sqrt(5.0)), n);
  }
  /// sum_j coeffs[j] t^j.
  static LinkFunction polynomial(std::vector<double> coeffs, Normalization n = Normalization::unit) {
    if (coeffs.empty()) throw ShapeError("polynomial link needs at least one coefficient");
    LinkFunction f(Kind::polynomial);
    f.coeffs_ = std::move(coeffs);
    // E[p(z)^2] = sum_{i,j} a_i a_j E[z^{i+j}], E[z^{2m}] = (2m-1)!!
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < f.coeffs_.size(); ++i) {
      for (std::size_t j = 0; j < f.coeffs_.size(); ++j) {
        const std::size_t p = i + j;
        if (p % 2 != 0) continue;
        double moment = 1.0;
        for (std::size_t m = 1; m < p; m += 2) moment *= static_cast<double>(m);
        norm_sq += f.coeffs_[i] * f.coeffs_[j] * moment;
      }
    }
    return with_norm(std::move(f), norm_sq, n);
  }
  /// Natural cubic spline through (grid[i], values[i]); linear beyond the ends.
  static LinkFunction tabulated(std::vector<double> grid, std::vector<double> values,
                                Normalization n = Normalization::unit);

  /// Parses names used in config files: "identity", "relu", "abs", "square",
  /// "damped_square", "hermite<k>" (e.g. "hermite3").
  static LinkFunction from_name(const std::string& name);

  Kind kind() const noexcept { return kind_; }
  int hermite_order() const noexcept { return order_; }
  double scale() const noexcept { return scale_; }
  const std::vector<double>& polynomial_coefficients() const noexcept { return coeffs_; }
  std::string name() const;

  double value(double t) const { return scale_ * raw_value(t); }
  double derivative(double t) const { return scale_ * raw_derivative(t); }

  /// Elementwise derivative; vectorized for Hermite links.
  void derivative(const Eigen::Ref<const Eigen::VectorXd>& t, Eigen::Ref<Eigen::VectorXd> out) const {
    if (kind_ == Kind::hermite) {
      if (order_ == 0) {
        out.setZero();
        return;
      }
      // sqrt(k) h_{k-1}(t) by the same recurrence as hermite_eval.
      const int m = order_ - 1;
      if (m == 0) {
        out.setConstant(scale_ * detail::sqrt_int(order_));
        return;
      }
      Eigen::ArrayXd prev = Eigen::ArrayXd::Ones(t.size());
      Eigen::ArrayXd cur = t.array();
      for (int n = 1; n < m; ++n) {
        Eigen::ArrayXd next = (t.array() * cur - detail::sqrt_int(n) * prev) * detail::inv_sqrt_int(n + 1);
        prev.swap(cur);
        cur.swap(next);
      }
      out = (scale_ * detail::sqrt_int(order_)) * cur.matrix();
      return;
    }
    for (Eigen::Index i = 0; i < t.size(); ++i) out[i] = derivative(t[i]);
  }
  double second_derivative(double t) const { return scale_ * raw_second_derivative(t); }

 private:
  explicit LinkFunction(Kind kind) : kind_(kind) {}

  static LinkFunction with_norm(LinkFunction f, double norm_sq, Normalization n) {
    if (n == Normalization::unit) {
      if (!(norm_sq > 0.0)) throw EvaluationError("link has zero L2(gamma) norm; cannot normalize");
      f.scale_ = 1.0 / std::sqrt(norm_sq);
    }
    return f;
  }

  double raw_value(double t) const;
  double raw_derivative(double t) const;
  double raw_second_derivative(double t) const;
  std::size_t spline_interval(double t) const;

  Kind kind_;
  int order_ = 0;
  double scale_ = 1.0;
  std::vector<double> coeffs_;
  std::vector<double> grid_;
  std::vector<double> table_;
  std::vector<double> curvature_;  // spline second derivatives at the grid points
};

inline double LinkFunction::raw_value(double t) const {
  switch (kind_) {
    case Kind::hermite: return hermite_eval(order_, t);
    case Kind::identity: return t;
    case Kind::absolute_value: return std::abs(t);
    case Kind::square: return t * t;
    case Kind::relu: return t > 0.0 ? t : 0.0;
    case Kind::damped_square: return t * t * std::exp(-t * t);
    case Kind::polynomial: {
      double acc = 0.0;
      for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * t + *it;
      return acc;
    }
    case Kind::tabulated: {
      const std::size_t n = grid_.size();
      if (t <= grid_.front()) return table_.front() + raw_derivative(grid_.front()) * (t - grid_.front());
      if (t >= grid_.back()) return table_.back() + raw_derivative(grid_.back()) * (t - grid_.back());
      const std::size_t i = spline_interval(t);
      const double h = grid_[i + 1] - grid_[i];
      const double a = (grid_[i + 1] - t) / h;
      const double b = 1.0 - a;
      (void)n;
      return a * table_[i] + b * table_[i + 1] +
             ((a * a * a - a) * curvature_[i] + (b * b * b - b) * curvature_[i + 1]) * h * h / 6.0;
    }
  }
  return 0.0;
}

inline double LinkFunction::raw_derivative(double t) const {
  switch (kind_) {
    case Kind::hermite: return order_ == 0 ? 0.0 : std::sqrt(static_cast<double>(order_)) * hermite_eval(order_ - 1, t);
    case Kind::identity: return 1.0;
    case Kind::absolute_value: return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0);
    case Kind::square: return 2.0 * t;
    case Kind::relu: return t > 0.0 ? 1.0 : 0.0;
    case Kind::damped_square: return 2.0 * t * (1.0 - t * t) * std::exp(-t * t);
    case Kind::polynomial: {
      double acc = 0.0;
      for (std::size_t j = coeffs_.size(); j-- > 1;) acc = acc * t + static_cast<double>(j) * coeffs_[j];
      return acc;
    }
    case Kind::tabulated: {
      const double tc = std::clamp(t, grid_.front(), grid_.back());
      const std::size_t i = spline_interval(tc);
      const double h = grid_[i + 1] - grid_[i];
      const double a = (grid_[i + 1] - tc) / h;
      const double b = 1.0 - a;
      return (table_[i + 1] - table_[i]) / h -
             (3.0 * a * a - 1.0) / 6.0 * h * curvature_[i] + (3.0 * b * b - 1.0) / 6.0 * h * curvature_[i + 1];
    }
  }
  return 0.0;
}

inline double LinkFunction::raw_second_derivative(double t) const {
  switch (kind_) {
    case Kind::hermite:
      return order_ < 2 ? 0.0
                        : std::sqrt(static_cast<double>(order_) * (order_ - 1)) * hermite_eval(order_ - 2, t);
    case Kind::identity:
    case Kind::absolute_value:
    case Kind::relu: return 0.0;
    case Kind::square: return 2.0;
    case Kind::damped_square: {
      const double t2 = t * t;
      return (2.0 - 10.0 * t2 + 4.0 * t2 * t2) * std::exp(-t2);
    }
    case Kind::polynomial: {
      double acc = 0.0;
      for (std::size_t j = coeffs_.size(); j-- > 2;) acc = acc * t + static_cast<double>(j * (j - 1)) * coeffs_[j];
      return acc;
    }
    case Kind::tabulated: {
      if (t <= grid_.front() || t >= grid_.back()) return 0.0;
      const std::size_t i = spline_interval(t);
      const double a = (grid_[i + 1] - t) / (grid_[i + 1] - grid_[i]);
      return a * curvature_[i] + (1.0 - a) * curvature_[i + 1];
    }
  }
  return 0.0;
}

inline std::size_t LinkFunction::spline_interval(double t) const {
  auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
  std::size_t i = it == grid_.begin() ? 0 : static_cast<std::size_t>(it - grid_.begin()) - 1;
  return std::min(i, grid_.size() - 2);
}

/// Hermite coefficients c_0..c_K of a link, with the L2(gamma) mass they miss.
struct HermiteExpansion {
  std::vector<double> coefficients;
  int truncation_order = 0;
  double norm_sq = 0.0;        // E[sigma^2] under the same quadrature
  double residual_mass = 0.0;  // norm_sq - sum c_k^2

  double operator[](int k) const {
    return k >= 0 && k <= truncation_order ? coefficients[static_cast<std::size_t>(k)] : 0.0;
  }
};

inline constexpr int kDefaultTruncationOrder = 16;
inline constexpr int kDefaultQuadratureNodes = 128;
inline constexpr double kDefaultCoefficientTolerance = 1e-8;

/// c_k = E[sigma(z) h_k(z)] by Gauss-Hermite quadrature. Exact (to rounding)
/// for polynomial links of degree <= quadrature_nodes - 1.
inline HermiteExpansion expand(const LinkFunction& link, int K = kDefaultTruncationOrder,
                               int quadrature_nodes = kDefaultQuadratureNodes) {
  if (K < 1) throw ShapeError("expand: truncation order must be >= 1");
  if (quadrature_nodes < 2 * K + 1) throw ShapeError("expand: need at least 2K+1 quadrature nodes");
  const GaussHermiteRule rule = gauss_hermite_rule(quadrature_nodes);
  HermiteExpansion out;
  out.truncation_order = K;
  out.coefficients.assign(static_cast<std::size_t>(K) + 1, 0.0);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = rule.nodes[i];
    const double v = link.value(x);
    if (!std::isfinite(v)) {
      throw EvaluationError("link value is not finite at quadrature node " + std::to_string(x));
    }
    const std::vector<double> h = hermite_all(K, x);
    for (int k = 0; k <= K; ++k) out.coefficients[static_cast<std::size_t>(k)] += rule.weights[i] * v * h[static_cast<std::size_t>(k)];
    out.norm_sq += rule.weights[i] * v * v;
  }
  double captured = 0.0;
  for (double c : out.coefficients) captured += c * c;
  out.residual_mass = out.norm_sq - captured;
  return out;
}

/// Smallest k >= 1 with |c_k| > tol.
inline int information_exponent(const HermiteExpansion& expansion, double tol = kDefaultCoefficientTolerance) {
  if (!(tol > 0.0)) throw ShapeError("information_exponent: tol must be positive");
  for (int k = 1; k <= expansion.truncation_order; ++k) {
    if (std::abs(expansion[k]) > tol) return k;
  }
  throw NoSignalError("no Hermite coefficient with k >= 1 exceeds tol up to order " +
                      std::to_string(expansion.truncation_order));
}

inline LinkFunction LinkFunction::tabulated(std::vector<double> grid, std::vector<double> values,
                                            Normalization n) {
  if (grid.size() < 3 || grid.size() != values.size()) {
    throw ShapeError("tabulated link needs >= 3 grid points and matching values");
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw ShapeError("tabulated link grid must be strictly increasing");
  }
  LinkFunction f(Kind::tabulated);
  f.grid_ = std::move(grid);
  f.table_ = std::move(values);
  // Natural spline: tridiagonal solve for the second derivatives.
  const std::size_t m = f.grid_.size();
  f.curvature_.assign(m, 0.0);
  std::vector<double> u(m, 0.0);
  for (std::size_t i = 1; i + 1 < m; ++i) {
    const double sig = (f.grid_[i] - f.grid_[i - 1]) / (f.grid_[i + 1] - f.grid_[i - 1]);
    const double p = sig * f.curvature_[i - 1] + 2.0;
    f.curvature_[i] = (sig - 1.0) / p;
    const double slope_r = (f.table_[i + 1] - f.table_[i]) / (f.grid_[i + 1] - f.grid_[i]);
    const double slope_l = (f.table_[i] - f.table_[i - 1]) / (f.grid_[i] - f.grid_[i - 1]);
    u[i] = (6.0 * (slope_r - slope_l) / (f.grid_[i + 1] - f.grid_[i - 1]) - sig * u[i - 1]) / p;
  }
  f.curvature_[m - 1] = 0.0;
  for (std::size_t k = m - 1; k-- > 0;) f.curvature_[k] = f.curvature_[k] * f.curvature_[k + 1] + u[k];
  f.curvature_[0] = 0.0;
  if (n == Normalization::unit) {
    const GaussHermiteRule rule = gauss_hermite_rule(kDefaultQuadratureNodes);
    const double norm_sq = rule.expectation([&](double t) {
      const double v = f.raw_value(t);
      return v * v;
    });
    f = with_norm(std::move(f), norm_sq, n);
  }
  return f;
}

inline LinkFunction LinkFunction::from_name(const std::string& name) {
  if (name == "identity") return identity();
  if (name == "relu") return relu();
  if (name == "abs" || name == "absolute_value") return absolute_value();
  if (name == "square") return square();
  if (name == "damped_square") return damped_square();
  if (name.rfind("hermite", 0) == 0 && name.size() > 7 &&
      std::all_of(name.begin() + 7, name.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return hermite(std::stoi(name.substr(7)));
  }
  throw ShapeError("unknown link name '" + name + "'");
}

inline std::string LinkFunction::name() const {
  switch (kind_) {
    case Kind::hermite: return "hermite" + std::to_string(order_);
    case Kind::identity: return "identity";
    case Kind::absolute_value: return "abs";
    case Kind::square: return "square";
    case Kind::relu: return "relu";
    case Kind::damped_square: return "damped_square";
    case Kind::polynomial: return "polynomial";
    case Kind::tabulated: return "tabulated";
  }
  return "unknown";
}

}  // namespace sphlang
