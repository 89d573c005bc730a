#include <cmath>

#include <gtest/gtest.h>

#include "oracle_helpers.hpp"
#include "sphlang/oracles.hpp"

using namespace sphlang;

namespace {

UnitVector random_unit(Eigen::Index d, std::uint64_t seed) {
  RandomStream rng(seed);
  return sample_uniform(d, rng);
}

double max_z_score(const Vector& estimate, const Vector& truth, const Vector& se) {
  return ((estimate - truth).array().abs() / se.array()).maxCoeff();
}

}  // namespace

TEST(ClosedForm, Examples) {
  for (long d : {3L, 10L, 50L}) EXPECT_NEAR(closed_form_tpca_scale(1, d), (d - 1.0) / d, 1e-15);
  EXPECT_NEAR(closed_form_tpca_scale(3, 10), 0.225, 1e-15);
  EXPECT_THROW(closed_form_tpca_scale(4, 10), ParityError);
  EXPECT_THROW(closed_form_tpca_scale(0, 10), ParityError);
}

TEST(ClosedForm, ScalesAsInverseDimension) {
  for (long d : {50L, 100L, 200L}) EXPECT_NEAR(closed_form_tpca_scale(3, d) * d, 3.0, 0.3) << d;
}

TEST(McStationary, NoiselessTensorPcaMatchesClosedForm) {
  for (int k : {3, 5}) {
    for (Eigen::Index d : {10, 20}) {
      const UnitVector ts = random_unit(d, 10 * k + d);
      const TensorPcaInstance inst(k, ts, 0.0, 1);
      const StationaryAverages avg = mc_stationary(inst, 40000, 7);
      const Vector truth = closed_form_tpca_scale(k, d) * ts.coords();
      EXPECT_LE(max_z_score(avg.b_bar, truth, avg.b_se), 4.0) << "k=" << k << " d=" << d;
      EXPECT_LE((avg.g_bar - avg.g_bar.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_GT(avg.b_se.minCoeff(), 0.0);
    }
  }
}

TEST(McStationary, EvenTensorPcaSpikeInGBar) {
  const Eigen::Index d = 10;
  const UnitVector ts = random_unit(d, 40);
  const TensorPcaInstance inst(4, ts, 0.0, 1);
  const StationaryAverages avg = mc_stationary(inst, 100000, 8);
  const auto [vals, vecs] = oracle::jacobi_eigen(avg.g_bar);
  EXPECT_GE(std::abs(vecs.col(0).dot(ts.coords())), 0.95);
  EXPECT_GT(vals[0], 0.0);
  // Off-spike directions carry a smaller, negative eigenvalue.
  EXPECT_LT(vals[d - 1], 0.0);
  // Signed overlap of b_bar with theta* is statistically zero for an even order.
  const double proj = avg.b_bar.dot(ts.coords());
  const double proj_se = std::sqrt(avg.b_se.cwiseProduct(ts.coords()).squaredNorm());
  EXPECT_LE(std::abs(proj) / proj_se, 4.0);
}

TEST(McStationary, EvenSingleIndexHasNoFirstOrderSignal) {
  const Eigen::Index d = 10;
  const UnitVector ts = random_unit(d, 41);
  const auto data = make_single_index(500, d, LinkFunction::hermite(4), ts, 0.0, 42);
  const StationaryAverages avg = mc_stationary(data, 8192, 9);
  const double se = avg.b_se.mean();
  EXPECT_LE(avg.b_bar.norm(), 5.0 * se * std::sqrt(static_cast<double>(d)));
  const double proj_se = std::sqrt(avg.b_se.cwiseProduct(ts.coords()).squaredNorm());
  EXPECT_LE(std::abs(avg.b_bar.dot(ts.coords())) / proj_se, 4.0);
}

TEST(McStationary, NoisyTensorPcaDirection) {
  const Eigen::Index d = 10;
  const double n = 50.0 * d * d;
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const UnitVector ts = random_unit(d, 100 + seed);
    const TensorPcaInstance inst(3, ts, 1.0 / std::sqrt(n), 1000 + seed);
    const StationaryAverages avg = mc_stationary(inst, 20000, seed);
    total += avg.b_bar.normalized().dot(ts.coords());
  }
  EXPECT_GE(total / 20.0, 0.8);
}

TEST(McStationary, WorkerCountDoesNotChangeResult) {
  const Eigen::Index d = 6;
  const TensorPcaInstance inst(3, random_unit(d, 50), 0.1, 51);
  const StationaryAverages a = mc_stationary(inst, 20000, 52, 1);
  const StationaryAverages b = mc_stationary(inst, 20000, 52, 3);
  EXPECT_TRUE(a.b_bar == b.b_bar);
  EXPECT_TRUE(a.g_bar == b.g_bar);
  EXPECT_TRUE(a.b_se == b.b_se);
  EXPECT_THROW(mc_stationary(inst, 999, 1), ConfigError);
}

TEST(PopulationSimGradient, Examples) {
  const Eigen::Index d = 8;
  const UnitVector ts = random_unit(d, 60);
  RandomStream rng(61);
  Vector w = rng.normal_vector(d);
  w -= w.dot(ts.coords()) * ts.coords();
  const UnitVector equator(w);
  EXPECT_LE(population_sim_gradient(expand(LinkFunction::hermite(3)), equator, ts).norm(), 1e-15);
  const UnitVector theta = random_unit(d, 62);
  const Vector expected = project_tangent(theta, ts.coords()).coords();
  EXPECT_LE((population_sim_gradient(expand(LinkFunction::identity()), theta, ts).coords() - expected).norm(), 1e-12);
}

TEST(PopulationSimGradient, MatchesLargeSampleGradient) {
  const Eigen::Index d = 10;
  const UnitVector ts = random_unit(d, 63);
  const UnitVector theta(ts.coords() + 0.8 * random_unit(d, 64).coords());
  const long n = 1000000;
  const auto data = make_single_index(n, d, LinkFunction::hermite(3), ts, 0.0, 65);
  const Vector empirical = data.gradient(theta).coords();

  // Per-entry standard errors of the per-sample terms y sigma'(theta . x) P^perp x.
  const Vector u = data.inputs() * theta.coords();
  Vector w(n);
  data.link().derivative(u, w);
  w.array() *= data.labels().array();
  Matrix px = data.inputs() - u * theta.coords().transpose();
  const Matrix terms = px.array().colwise() * w.array();
  const Vector mean = terms.colwise().mean().transpose();
  const Vector var = ((terms.rowwise() - mean.transpose()).array().square().colwise().sum() / (n - 1.0)).transpose();
  const Vector se = (var / static_cast<double>(n)).cwiseSqrt();

  const Vector population = population_sim_gradient(expand(LinkFunction::hermite(3)), theta, ts).coords();
  EXPECT_LE(max_z_score(empirical, population, se), 4.0);
}
