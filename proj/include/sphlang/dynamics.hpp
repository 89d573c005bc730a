#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sphlang/errors.hpp"
#include "sphlang/estimators.hpp"
#include "sphlang/models.hpp"
#include "sphlang/random.hpp"
#include "sphlang/sphere.hpp"

namespace sphlang {

/// Which estimator a run finalizes with: the averaged iterate (odd
/// information exponent) or the top eigenvector of the averaged second moment.
enum class Parity { odd, even };

inline Parity parity_of(int information_exponent) {
  return information_exponent % 2 == 0 ? Parity::even : Parity::odd;
}

struct SdeConfig {
  Eigen::Index dimension = 0;
  double epsilon = 0.0;  // inverse-temperature drift scale
  double dt = 0.0;
  double horizon = 0.0;  // continuous time T; steps = round(T / dt)
  std::uint64_t seed = 0;
  long record_stride = 1;
  bool couple_brownian = false;
  Parity parity = Parity::odd;
  bool accumulate_second_moment = true;

  long steps() const { return std::max(1L, std::lround(horizon / dt)); }

  void validate() const {
    if (dimension < 2) throw ConfigError("d", "must be >= 2");
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon", "must be >= 0");
    if (!(dt > 0.0)) throw ConfigError("dt", "must be > 0");
    if (!(horizon > 0.0)) throw ConfigError("horizon", "must be > 0");
    if (record_stride < 1) throw ConfigError("record_stride", "must be >= 1");
    if (!(dt * static_cast<double>(dimension - 1) / 2.0 < 0.1)) {
      throw ConfigError("dt", "dt (d-1)/2 must be < 0.1 for the explicit radial drift");
    }
    if (horizon / dt > 1e9) throw ConfigError("horizon", "horizon / dt exceeds 1e9 steps");
  }
};

// Default parameter rules. The leading constants are desk-scale calibrations;
// only the exponents follow the theory.

/// Integration step with radial contraction dt (d-1)/2 ~ 0.05.
inline double default_dt(Eigen::Index d) { return 0.1 / static_cast<double>(d); }

/// 0.1 d^{-max(0, k-3)/2 - 0.1} for odd k, 0.1 d^{-(k-2)/2 - 0.1} for even k.
inline double default_epsilon(int information_exponent, Eigen::Index d) {
  const double dd = static_cast<double>(d);
  const double k = information_exponent;
  const double order = information_exponent % 2 == 1 ? std::max(0.0, k - 3.0) / 2.0 : (k - 2.0) / 2.0;
  return 0.1 * std::pow(dd, -order - 0.1);
}

/// 10 d^k / eps^2 for odd k, 10 d^{k+1} / eps^2 for even k.
inline double default_horizon(int information_exponent, Eigen::Index d, double epsilon) {
  const double dd = static_cast<double>(d);
  const int power = information_exponent % 2 == 1 ? information_exponent : information_exponent + 1;
  return 10.0 * std::pow(dd, power) / (epsilon * epsilon);
}

/// theta' = retract(theta + dt (-(d-1)/2 theta + eps b) + sqrt(dt) P_theta^perp noise).
inline UnitVector langevin_step(const UnitVector& theta, const TangentVector& b, double epsilon, double dt,
                                const Vector& noise) {
  const Vector& x = theta.coords();
  if (b.dim() != x.size() || noise.size() != x.size()) throw ShapeError("langevin_step: dimension mismatch");
  const double radial = -0.5 * static_cast<double>(x.size() - 1);
  const Vector drift = radial * x + epsilon * b.coords();
  return retract(x + dt * drift + std::sqrt(dt) * project_tangent(theta, noise).coords());
}

/// Spherical Brownian motion step; identical arithmetic to langevin_step with eps = 0.
inline UnitVector brownian_step(const UnitVector& beta, double dt, const Vector& noise) {
  const Vector& x = beta.coords();
  if (noise.size() != x.size()) throw ShapeError("brownian_step: dimension mismatch");
  const double radial = -0.5 * static_cast<double>(x.size() - 1);
  const Vector drift = radial * x;
  return retract(x + dt * drift + std::sqrt(dt) * project_tangent(beta, noise).coords());
}

/// One diagnostics row. Fields that do not apply to a run are NaN.
struct TrajectoryRecord {
  double time = 0.0;
  double corr_iterate = std::numeric_limits<double>::quiet_NaN();
  double corr_avg = std::numeric_limits<double>::quiet_NaN();
  double corr_eig = std::numeric_limits<double>::quiet_NaN();
  double err_sup = std::numeric_limits<double>::quiet_NaN();
  double norm_avg = 0.0;
};

struct TrajectorySummary {
  explicit TrajectorySummary(const UnitVector& start) : initial(start), final_iterate(start) {}

  Vector theta_avg;                     // left-Riemann time average of theta_t
  AveragedSecondMoment second_moment;   // time average of theta_t theta_t^T
  Vector beta_avg;                      // coupled runs only
  UnitVector initial;
  UnitVector final_iterate;
  double error_sup = 0.0;               // sup_t ||theta_t - beta_t|| (coupled runs)
  double drift_sup = 0.0;               // sup_t ||b(theta_t)||
  double max_abs_corr_iterate = 0.0;    // sup_t |theta_t . theta*| when a reference is known
  long steps = 0;
  double total_time = 0.0;
  Parity parity = Parity::odd;
  bool coupled = false;
  bool has_reference = false;
  std::vector<TrajectoryRecord> records;

  /// CSV with columns time, corr_iterate, corr_avg, then corr_eig for even
  /// runs and err_sup for coupled runs, then norm_avg.
  void write_csv(std::ostream& out) const {
    out << "time,corr_iterate,corr_avg";
    if (parity == Parity::even) out << ",corr_eig";
    if (coupled) out << ",err_sup";
    out << ",norm_avg\n";
    const auto old_precision = out.precision(17);
    for (const TrajectoryRecord& r : records) {
      out << r.time << ',' << r.corr_iterate << ',' << r.corr_avg;
      if (parity == Parity::even) out << ',' << r.corr_eig;
      if (coupled) out << ',' << r.err_sup;
      out << ',' << r.norm_avg << '\n';
    }
    out.precision(old_precision);
  }
};

namespace detail {

/// Streaming accumulator shared by the SDE and the discrete baselines.
class IterateAverager {
 public:
  IterateAverager(Eigen::Index d, bool second_moment)
      : mean_(Vector::Zero(d)), second_(second_moment ? Matrix::Zero(d, d) : Matrix()) {}

  void add(const Vector& x) {
    ++count_;
    const double w = 1.0 / static_cast<double>(count_);
    mean_ += w * (x - mean_);
    if (second_.size() > 0) {
      second_ *= 1.0 - w;
      second_.noalias() += w * x * x.transpose();
    }
  }

  long count() const noexcept { return count_; }
  const Vector& mean() const noexcept { return mean_; }
  const Matrix& second() const noexcept { return second_; }

 private:
  long count_ = 0;
  Vector mean_;
  Matrix second_;
};

/// Builds diagnostics rows; the eigenvector is warm-started from the last row.
class Recorder {
 public:
  Recorder(const UnitVector* reference, Parity parity, bool coupled)
      : reference_(reference), parity_(parity), coupled_(coupled) {}

  void record(double time, const UnitVector& theta, const IterateAverager& avg, double err_sup,
              std::vector<TrajectoryRecord>& rows) {
    TrajectoryRecord r;
    r.time = time;
    const Symmetry sym = parity_ == Parity::even ? Symmetry::absolute : Symmetry::signed_value;
    const Vector mean = avg.count() > 0 ? avg.mean() : theta.coords();
    r.norm_avg = mean.norm();
    if (reference_) {
      r.corr_iterate = correlation(theta, *reference_, sym);
      if (r.norm_avg > kMinRetractNorm) r.corr_avg = correlation(UnitVector(mean), *reference_, sym);
      if (parity_ == Parity::even) {
        if (avg.count() == 0 || avg.second().size() == 0) {
          r.corr_eig = std::abs(theta.dot(*reference_));
        } else {
          Vector start = eig_.size() == theta.dim() ? eig_ : theta.coords();
          const detail::PowerResult p =
              detail::power_iterate(avg.second(), std::move(start), 1e-10, default_power_iterations(theta.dim()));
          eig_ = p.vector;
          r.corr_eig = std::abs(eig_.dot(reference_->coords()));
        }
      }
    }
    if (coupled_) r.err_sup = err_sup;
    rows.push_back(r);
  }

 private:
  const UnitVector* reference_;
  Parity parity_;
  bool coupled_;
  Vector eig_;
};

}  // namespace detail

/// Integrates the spherical Langevin SDE from a uniform start and accumulates
/// the time averages of theta_t and theta_t theta_t^T. With couple_brownian,
/// a Brownian path driven by the same noise tracks the error process.
/// `reference` (theta*) is used for diagnostics only.
template <DriftField Field>
TrajectorySummary run_algorithm_one(const SdeConfig& config, const Field& field,
                                    const UnitVector* reference = nullptr) {
  config.validate();
  const Eigen::Index d = config.dimension;
  if (field.dimension() != d) throw ConfigError("d", "does not match the problem instance");
  if (reference && reference->dim() != d) throw ShapeError("reference dimension mismatch");

  RandomStream init_rng(derive_seed(config.seed, 0));
  RandomStream noise_rng(derive_seed(config.seed, 1));
  const UnitVector start = sample_uniform(d, init_rng);
  UnitVector theta = start;
  UnitVector beta = start;

  const long steps = config.steps();
  detail::IterateAverager avg(d, config.accumulate_second_moment || config.parity == Parity::even);
  detail::IterateAverager beta_avg(d, false);
  detail::Recorder recorder(reference, config.parity, config.couple_brownian);

  TrajectorySummary out(start);
  out.parity = config.parity;
  out.coupled = config.couple_brownian;
  out.has_reference = reference != nullptr;
  out.records.reserve(static_cast<std::size_t>(steps / config.record_stride + 1));

  Vector noise(d);
  double err_sup = 0.0;
  double max_corr = reference ? std::abs(theta.dot(*reference)) : 0.0;
  for (long s = 0; s < steps; ++s) {
    if (s % config.record_stride == 0) recorder.record(static_cast<double>(s) * config.dt, theta, avg, err_sup, out.records);
    avg.add(theta.coords());
    if (config.couple_brownian) beta_avg.add(beta.coords());

    const TangentVector b = field.gradient(theta);
    out.drift_sup = std::max(out.drift_sup, b.norm());
    noise_rng.fill_normal(noise);
    theta = langevin_step(theta, b, config.epsilon, config.dt, noise);
    if (config.couple_brownian) {
      beta = brownian_step(beta, config.dt, noise);
      err_sup = std::max(err_sup, (theta.coords() - beta.coords()).norm());
    }
    if (reference) max_corr = std::max(max_corr, std::abs(theta.dot(*reference)));
  }
  if (steps % config.record_stride == 0) {
    recorder.record(static_cast<double>(steps) * config.dt, theta, avg, err_sup, out.records);
  }

  out.theta_avg = avg.mean();
  out.second_moment = {avg.second(), static_cast<double>(steps) * config.dt};
  if (config.couple_brownian) out.beta_avg = beta_avg.mean();
  out.final_iterate = theta;
  out.error_sup = err_sup;
  out.max_abs_corr_iterate = max_corr;
  out.steps = steps;
  out.total_time = static_cast<double>(steps) * config.dt;
  return out;
}

inline TrajectorySummary run_algorithm_one(const SdeConfig& config, const ProblemInstance& instance) {
  return run_algorithm_one(config, instance, &instance.theta_star());
}

/// theta_hat / ||theta_hat||.
inline UnitVector finalize_odd(const TrajectorySummary& summary) {
  if (!(summary.theta_avg.norm() > kMinRetractNorm)) {
    throw DegenerateError("averaged iterate is zero; horizon too short or information exponent even");
  }
  return retract(summary.theta_avg);
}

/// Top eigenvector of the averaged second moment (sign unspecified).
inline EigenPair finalize_even(const TrajectorySummary& summary, double tol = 1e-10, int max_iter = 0) {
  if (summary.second_moment.matrix.size() == 0) throw ConfigError("parity", "second moment was not accumulated");
  return top_eigenvector(summary.second_moment, tol, max_iter);
}

// ---------------------------------------------------------------------------
// Discrete baselines.

/// theta' = (theta - eta g) / ||theta - eta g||, g = -y sigma'(theta . x) P_theta^perp x.
/// The gradient is projected before the step; normalization would remove its
/// radial part only up to O(eta^2).
inline UnitVector minibatch_sgd_step(const UnitVector& theta, const Vector& x, double y, double eta,
                                     const LinkFunction& link) {
  if (eta < 0.0) throw ConfigError("eta", "must be >= 0");
  if (x.size() != theta.dim()) throw ShapeError("minibatch_sgd_step: dimension mismatch");
  if (eta == 0.0) return theta;
  const TangentVector b = sample_gradient(link, theta, x, y);  // b = -g
  return retract(theta.coords() + eta * b.coords());
}

struct MinibatchConfig {
  double eta = 0.0;
  long steps = 0;
  std::uint64_t seed = 0;
  long record_stride = 1;
  Parity parity = Parity::odd;
  bool accumulate_second_moment = false;
};

/// Batch-size-1 SGD with i_t ~ U([n]) and running iterate averages. Time in
/// the records is the iteration count.
inline TrajectorySummary run_minibatch_sgd(const MinibatchConfig& config, const SingleIndexDataset& data) {
  if (!(config.eta > 0.0)) throw ConfigError("eta", "must be > 0");
  if (config.steps < 1) throw ConfigError("steps", "must be >= 1");
  if (config.record_stride < 1) throw ConfigError("record_stride", "must be >= 1");
  const Eigen::Index d = data.dimension();
  RandomStream init_rng(derive_seed(config.seed, 0));
  RandomStream index_rng(derive_seed(config.seed, 2));
  const UnitVector start = sample_uniform(d, init_rng);
  UnitVector theta = start;
  const UnitVector& reference = data.theta_star();

  detail::IterateAverager avg(d, config.accumulate_second_moment || config.parity == Parity::even);
  detail::Recorder recorder(&reference, config.parity, false);
  TrajectorySummary out(start);
  out.parity = config.parity;
  out.has_reference = true;
  double max_corr = std::abs(theta.dot(reference));
  Vector x(d);
  for (long s = 0; s < config.steps; ++s) {
    if (s % config.record_stride == 0) recorder.record(static_cast<double>(s), theta, avg, 0.0, out.records);
    avg.add(theta.coords());
    const std::size_t i = index_rng.index(static_cast<std::size_t>(data.size()));
    x = data.inputs().row(static_cast<Eigen::Index>(i)).transpose();
    theta = minibatch_sgd_step(theta, x, data.labels()[static_cast<Eigen::Index>(i)], config.eta, data.link());
    max_corr = std::max(max_corr, std::abs(theta.dot(reference)));
  }
  if (config.steps % config.record_stride == 0) {
    recorder.record(static_cast<double>(config.steps), theta, avg, 0.0, out.records);
  }
  out.theta_avg = avg.mean();
  out.second_moment = {avg.second(), static_cast<double>(config.steps)};
  out.final_iterate = theta;
  out.max_abs_corr_iterate = max_corr;
  out.steps = config.steps;
  out.total_time = static_cast<double>(config.steps);
  return out;
}

/// Spherical online SGD on the per-sample correlation loss, one fresh sample
/// per step: theta <- retract(theta + eta y sigma'(theta . x) P^perp x).
inline UnitVector online_sgd_refine(const UnitVector& theta0, SampleStream& stream, double eta, long steps) {
  if (eta < 0.0) throw ConfigError("eta", "must be >= 0");
  if (steps < 0) throw ConfigError("steps", "must be >= 0");
  if (theta0.dim() != stream.theta_star().dim()) throw ShapeError("online_sgd_refine: dimension mismatch");
  if (static_cast<std::size_t>(steps) > stream.remaining()) {
    throw InsufficientSamplesError("online_sgd_refine needs " + std::to_string(steps) + " samples, stream has " +
                                   std::to_string(stream.remaining()));
  }
  UnitVector theta = theta0;
  for (long s = 0; s < steps; ++s) {
    const SampleStream::Sample sample = stream.next();
    if (eta == 0.0) continue;
    theta = retract(theta.coords() + eta * sample_gradient(stream.link(), theta, sample.x, sample.y).coords());
  }
  return theta;
}

}  // namespace sphlang
