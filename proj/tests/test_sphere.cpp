#include <cmath>

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include "sphlang/sphere.hpp"

using namespace sphlang;

TEST(UnitVector, RejectsDegenerateInput) {
  EXPECT_THROW(UnitVector(Vector::Ones(1)), DimensionError);
  EXPECT_THROW(UnitVector(Vector::Zero(3)), DegenerateError);
}

TEST(UnitVector, NormalizesOnConstruction) {
  Vector v(3);
  v << 1.0, 2.0, 2.0;
  const UnitVector u(v);
  EXPECT_NEAR(u.coords().norm(), 1.0, 1e-15);
  EXPECT_NEAR(u[2], 2.0 / 3.0, 1e-15);
}

TEST(SampleUniform, UnitNormAndDimensionCheck) {
  RandomStream rng(3);
  EXPECT_THROW(sample_uniform(1, rng), DimensionError);
  for (int i = 0; i < 1000; ++i) {
    const UnitVector z = sample_uniform(7, rng);
    EXPECT_NEAR(z.coords().norm(), 1.0, 1e-9);
  }
}

TEST(SampleUniform, CircleMeanMatchesRejectionSampler) {
  // Independent oracle: rejection sampling from the unit disk, then normalizing.
  constexpr int kDraws = 100000;
  RandomStream rng(11);
  Vector mean = Vector::Zero(2);
  for (int i = 0; i < kDraws; ++i) mean += sample_uniform(2, rng).coords();
  mean /= kDraws;

  RandomStream rng2(12);
  Vector ref = Vector::Zero(2);
  int accepted = 0;
  while (accepted < kDraws) {
    Vector p(2);
    p << 2.0 * rng2.uniform() - 1.0, 2.0 * rng2.uniform() - 1.0;
    const double r = p.norm();
    if (r > 1.0 || r < 1e-12) continue;
    ref += p / r;
    ++accepted;
  }
  ref /= kDraws;
  EXPECT_LE(mean.norm(), 0.02);
  EXPECT_LE(ref.norm(), 0.02);
}

TEST(SampleUniform, SecondMomentIsOneOverD) {
  constexpr int kDraws = 100000;
  constexpr long d = 10;
  RandomStream rng(5);
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    const double z1 = sample_uniform(d, rng)[0];
    sum += z1 * z1;
    sum_sq += z1 * z1 * z1 * z1;
  }
  const double mean = sum / kDraws;
  const double se = std::sqrt((sum_sq / kDraws - mean * mean) / kDraws);
  EXPECT_NEAR(mean, 0.1, 3.0 * se);
}

TEST(SampleUniform, RotationInvariantSecondMoment) {
  constexpr int kDraws = 100000;
  constexpr long d = 10;
  RandomStream rng(21);
  // Random orthogonal map via Gram-Schmidt on a Gaussian matrix.
  Matrix q(d, d);
  for (long j = 0; j < d; ++j) {
    Vector c = rng.normal_vector(d);
    for (long i = 0; i < j; ++i) c -= c.dot(q.col(i)) * q.col(i);
    q.col(j) = c.normalized();
  }
  Matrix second = Matrix::Zero(d, d);
  for (int i = 0; i < kDraws; ++i) {
    const Vector z = q * sample_uniform(d, rng).coords();
    second += z * z.transpose();
  }
  second /= kDraws;
  const Matrix diff = second - Matrix::Identity(d, d) / d;
  const double op_norm = diff.jacobiSvd().singularValues()[0];
  EXPECT_LE(op_norm, 0.05);
}

TEST(ProjectTangent, Examples) {
  RandomStream rng(1);
  const UnitVector theta = sample_uniform(5, rng);
  EXPECT_LE(project_tangent(theta, theta.coords()).norm(), 1e-15);

  const UnitVector e1 = UnitVector::basis(4, 0);
  const Vector e2 = UnitVector::basis(4, 1).coords();
  EXPECT_EQ(project_tangent(e1, e2).coords(), e2);

  EXPECT_THROW(project_tangent(e1, Vector::Ones(3)), ShapeError);
}

TEST(ProjectTangent, OrthogonalAndIdempotent) {
  RandomStream rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const UnitVector base = sample_uniform(8, rng);
    const Vector v = 3.0 * rng.normal_vector(8);
    const TangentVector t = project_tangent(base, v);
    EXPECT_LE(std::abs(t.coords().dot(base.coords())), 1e-12 * v.norm());
    const TangentVector again = project_tangent(base, t.coords());
    EXPECT_LE((again.coords() - t.coords()).norm(), 1e-12 * std::max(1.0, t.norm()));
  }
}

TEST(Retract, Examples) {
  Vector v(2);
  v << 3.0, 4.0;
  const UnitVector r = retract(v);
  EXPECT_NEAR(r[0], 0.6, 1e-15);
  EXPECT_NEAR(r[1], 0.8, 1e-15);

  RandomStream rng(4);
  const UnitVector u = sample_uniform(6, rng);
  EXPECT_LE((retract(u.coords()).coords() - u.coords()).cwiseAbs().maxCoeff(), 1e-15);

  EXPECT_THROW(retract(Vector::Zero(3)), DegenerateError);
}

TEST(SphericalEvenMoment, ClosedForm) {
  EXPECT_EQ(spherical_even_moment(7, 0), 1.0);
  EXPECT_NEAR(spherical_even_moment(10, 2), 0.1, 1e-15);
  EXPECT_NEAR(spherical_even_moment(3, 4), 0.2, 1e-15);
  EXPECT_EQ(spherical_even_moment(10, 3), 0.0);
  EXPECT_THROW(spherical_even_moment(1, 2), DimensionError);
}

TEST(SphericalEvenMoment, MatchesMonteCarlo) {
  constexpr int kDraws = 100000;
  RandomStream rng(8);
  for (long d : {5L, 20L, 100L}) {
    std::vector<double> z1(kDraws);
    for (double& z : z1) z = sample_uniform(d, rng)[0];
    for (int k : {1, 2, 3}) {
      double sum = 0.0, sum_sq = 0.0;
      for (double z : z1) {
        const double p = std::pow(z, 2 * k);
        sum += p;
        sum_sq += p * p;
      }
      const double mean = sum / kDraws;
      const double se = std::sqrt((sum_sq / kDraws - mean * mean) / kDraws);
      EXPECT_NEAR(mean, spherical_even_moment(d, 2 * k), 4.0 * se) << "d=" << d << " k=" << k;
    }
  }
}
