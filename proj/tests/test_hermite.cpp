#include <cmath>

#include <gtest/gtest.h>

#include "oracle_helpers.hpp"
#include "sphlang/hermite.hpp"
#include "sphlang/random.hpp"

using namespace sphlang;

TEST(HermiteEval, Examples) {
  EXPECT_EQ(hermite_eval(0, 3.7), 1.0);
  EXPECT_EQ(hermite_eval(1, 2.0), 2.0);
  EXPECT_NEAR(hermite_eval(3, 2.0), 2.0 / std::sqrt(6.0), 1e-15);
  EXPECT_THROW(hermite_eval(-1, 0.0), ShapeError);
}

TEST(HermiteEval, MatchesMonomialExpansion) {
  for (int k = 0; k <= 10; ++k) {
    const auto coeffs = oracle::hermite_monomial(k);
    for (double x : {-2.5, -0.3, 0.0, 1.1, 3.0}) {
      double ref = 0.0;
      for (std::size_t j = coeffs.size(); j-- > 0;) ref = ref * x + coeffs[j];
      EXPECT_NEAR(hermite_eval(k, x), ref, 1e-12 * std::max(1.0, std::abs(ref))) << "k=" << k << " x=" << x;
    }
  }
}

TEST(GaussHermite, Orthonormality) {
  const GaussHermiteRule rule = gauss_hermite_rule(64);
  for (int i = 0; i <= 10; ++i) {
    for (int j = 0; j <= 10; ++j) {
      const double ip = rule.expectation([&](double x) { return hermite_eval(i, x) * hermite_eval(j, x); });
      EXPECT_NEAR(ip, i == j ? 1.0 : 0.0, 1e-8) << i << "," << j;
    }
  }
}

TEST(GaussHermite, WeightsSumToOneAndNodesSymmetric) {
  for (int n : {1, 2, 7, 128}) {
    const GaussHermiteRule rule = gauss_hermite_rule(n);
    double total = 0.0;
    for (double w : rule.weights) total += w;
    EXPECT_NEAR(total, 1.0, 1e-13) << n;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      EXPECT_NEAR(rule.nodes[i], -rule.nodes[rule.nodes.size() - 1 - i], 1e-12);
    }
  }
}

TEST(Expand, HermiteLinkIsOneHot) {
  for (int k = 1; k <= 6; ++k) {
    const HermiteExpansion e = expand(LinkFunction::hermite(k));
    double parseval = 0.0;
    for (int j = 0; j <= e.truncation_order; ++j) {
      EXPECT_NEAR(e[j], j == k ? 1.0 : 0.0, 1e-12) << "k=" << k << " j=" << j;
      parseval += e[j] * e[j];
    }
    EXPECT_NEAR(parseval, 1.0, 1e-10);
    EXPECT_EQ(information_exponent(e), k);
  }
}

TEST(Expand, RawSquareMatchesSymbolicOracle) {
  const HermiteExpansion e = expand(LinkFunction::square(LinkFunction::Normalization::raw));
  const std::vector<double> t2{0.0, 0.0, 1.0};
  for (int k = 0; k <= e.truncation_order; ++k) {
    const double ref = oracle::gaussian_inner(t2, oracle::hermite_monomial(k));
    EXPECT_NEAR(e[k], ref, 1e-12) << k;
  }
  EXPECT_NEAR(e[0], 1.0, 1e-12);
  EXPECT_NEAR(e[2], std::sqrt(2.0), 1e-12);
}

TEST(Expand, PolynomialLinkIsExact) {
  const std::vector<double> coeffs{0.3, -1.0, 0.0, 0.5, 0.2};
  const LinkFunction link = LinkFunction::polynomial(coeffs, LinkFunction::Normalization::raw);
  const HermiteExpansion e = expand(link, 8, 32);
  for (int k = 0; k <= 8; ++k) {
    EXPECT_NEAR(e[k], oracle::gaussian_inner(coeffs, oracle::hermite_monomial(k)), 1e-12) << k;
  }
  EXPECT_NEAR(e.residual_mass, 0.0, 1e-10);
}

TEST(Expand, AbsoluteValueHasEvenSupport) {
  const HermiteExpansion e = expand(LinkFunction::absolute_value());
  EXPECT_NEAR(e[1], 0.0, 1e-12);
  EXPECT_GT(e[2], 0.0);
  EXPECT_EQ(information_exponent(e), 2);
}

TEST(Expand, BesselInequality) {
  for (const LinkFunction& link : {LinkFunction::relu(), LinkFunction::absolute_value(), LinkFunction::square(),
                                   LinkFunction::damped_square(), LinkFunction::identity()}) {
    const HermiteExpansion e = expand(link);
    EXPECT_GE(e.residual_mass, -1e-6) << link.name();
  }
}

TEST(Expand, Preconditions) {
  EXPECT_THROW(expand(LinkFunction::identity(), 0, 8), ShapeError);
  EXPECT_THROW(expand(LinkFunction::identity(), 8, 16), ShapeError);
  const LinkFunction blowup = LinkFunction::polynomial({0.0, 0.0, 0.0, 1e307}, LinkFunction::Normalization::raw);
  EXPECT_THROW(expand(blowup, 4, 16), EvaluationError);
}

TEST(InformationExponent, ExampleLinks) {
  EXPECT_EQ(information_exponent(expand(LinkFunction::identity())), 1);
  EXPECT_EQ(information_exponent(expand(LinkFunction::relu())), 1);
  EXPECT_EQ(information_exponent(expand(LinkFunction::absolute_value())), 2);
  EXPECT_EQ(information_exponent(expand(LinkFunction::square())), 2);
  EXPECT_EQ(information_exponent(expand(LinkFunction::damped_square())), 4);
}

TEST(InformationExponent, NoSignal) {
  const HermiteExpansion constant = expand(LinkFunction::polynomial({1.0}, LinkFunction::Normalization::raw));
  EXPECT_THROW(information_exponent(constant), NoSignalError);
  EXPECT_THROW(information_exponent(constant, 0.0), ShapeError);
}

TEST(InformationExponent, OfXTimesLink) {
  // g(x) = x h_k(x) = sqrt(k+1) h_{k+1} + sqrt(k) h_{k-1}: exponent k-1 for k >= 2.
  for (int k = 2; k <= 5; ++k) {
    std::vector<double> g(oracle::hermite_monomial(k).size() + 1, 0.0);
    const auto h = oracle::hermite_monomial(k);
    for (std::size_t j = 0; j < h.size(); ++j) g[j + 1] = h[j];
    const HermiteExpansion e = expand(LinkFunction::polynomial(g, LinkFunction::Normalization::raw));
    EXPECT_EQ(information_exponent(e), k - 1) << k;
  }
}

TEST(LinkFunction, NormalizedLinksHaveUnitSecondMoment) {
  const GaussHermiteRule rule = gauss_hermite_rule(128);
  for (const LinkFunction& link : {LinkFunction::square(), LinkFunction::damped_square(), LinkFunction::identity(),
                                   LinkFunction::hermite(4),
                                   LinkFunction::polynomial({1.0, 2.0, 0.0, -1.0})}) {
    const double m2 = rule.expectation([&](double t) { return link.value(t) * link.value(t); });
    EXPECT_NEAR(m2, 1.0, 1e-10) << link.name();
  }
  // Kinked links: quadrature converges slowly, so check against closed forms.
  EXPECT_NEAR(LinkFunction::relu().scale(), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(LinkFunction::absolute_value().scale(), 1.0);
}

TEST(LinkFunction, DerivativesMatchFiniteDifferences) {
  RandomStream rng(77);
  std::vector<double> points(100);
  for (double& p : points) p = -3.0 + 6.0 * rng.uniform();
  std::vector<double> grid, table;
  for (int i = 0; i <= 60; ++i) {
    const double t = -6.0 + 0.2 * i;
    grid.push_back(t);
    table.push_back(std::sin(t));
  }
  const std::vector<LinkFunction> links{
      LinkFunction::hermite(3), LinkFunction::hermite(6), LinkFunction::identity(), LinkFunction::square(),
      LinkFunction::relu(), LinkFunction::absolute_value(), LinkFunction::damped_square(),
      LinkFunction::polynomial({0.1, 0.0, -2.0, 0.3}), LinkFunction::tabulated(grid, table)};
  constexpr double h = 1e-5;
  for (const LinkFunction& link : links) {
    for (double t : points) {
      const double fd1 = (link.value(t + h) - link.value(t - h)) / (2 * h);
      const double fd2 = (link.derivative(t + h) - link.derivative(t - h)) / (2 * h);
      const double scale = std::max(1.0, std::abs(link.derivative(t)));
      EXPECT_NEAR(link.derivative(t), fd1, 1e-6 * scale) << link.name() << " t=" << t;
      if (link.kind() != LinkFunction::Kind::tabulated) {
        EXPECT_NEAR(link.second_derivative(t), fd2, 1e-6 * std::max(1.0, std::abs(link.second_derivative(t))))
            << link.name() << " t=" << t;
      }
    }
  }
}

TEST(LinkFunction, BatchDerivativeMatchesScalar) {
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(41, -4.0, 4.0);
  Eigen::VectorXd out(t.size());
  for (int k = 0; k <= 6; ++k) {
    const LinkFunction link = LinkFunction::hermite(k);
    link.derivative(t, out);
    for (Eigen::Index i = 0; i < t.size(); ++i) EXPECT_NEAR(out[i], link.derivative(t[i]), 1e-12);
  }
}

TEST(LinkFunction, FromName) {
  EXPECT_EQ(LinkFunction::from_name("hermite3").hermite_order(), 3);
  EXPECT_EQ(LinkFunction::from_name("relu").kind(), LinkFunction::Kind::relu);
  EXPECT_THROW(LinkFunction::from_name("hermite"), ShapeError);
  EXPECT_THROW(LinkFunction::from_name("hermitex"), ShapeError);
  EXPECT_THROW(LinkFunction::from_name("cosine"), ShapeError);
}
