#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "effcap/quadrature.hpp"

namespace quad = effcap::quad;

TEST(GaussHermite, WeightsSymmetricAndNormalized) {
  for (int n : {2, 7, 48, 200}) {
    const quad::Rule r = quad::gauss_hermite(n);
    ASSERT_EQ(r.size(), static_cast<std::size_t>(n));
    const double total = std::accumulate(r.weights.begin(), r.weights.end(), 0.0);
    EXPECT_NEAR(total, std::sqrt(std::numbers::pi), 1e-10) << n;
    for (std::size_t i = 0; i < r.size(); ++i) {
      EXPECT_GT(r.weights[i], 0.0);
      EXPECT_EQ(r.nodes[i], -r.nodes[r.size() - 1 - i]);
    }
  }
  EXPECT_THROW(quad::gauss_hermite(0), effcap::ConfigError);
}

TEST(GaussHermite, ExactForEvenMoments) {
  // integral x^{2k} e^{-x^2} = Gamma(k + 1/2)
  const quad::Rule r = quad::gauss_hermite(20);
  for (int k = 0; k < 20; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], 2 * k);
    EXPECT_NEAR(s / std::tgamma(k + 0.5), 1.0, 1e-12) << k;
  }
}

TEST(GaussLaguerre, GeneralizedMoments) {
  // integral x^k x^a e^{-x} = Gamma(k + a + 1)
  for (double a : {-0.5, 0.0, 1.0, 4.0}) {
    const quad::Rule r = quad::gauss_laguerre(32, a);
    for (int k = 0; k < 30; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < r.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], k);
      EXPECT_NEAR(s / std::tgamma(k + a + 1.0), 1.0, 1e-11) << a << " " << k;
    }
  }
  EXPECT_THROW(quad::gauss_laguerre(8, -1.0), effcap::ConfigError);
}

TEST(GaussLaguerre, SmallWeightsKeepRelativeAccuracy) {
  // e^{2 sqrt(K x)} grows fast enough that the tail weights dominate.
  const double k = 10.0;
  const quad::Rule r = quad::gauss_laguerre(128, 0.0);
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += r.weights[i] * std::cyl_bessel_i(0.0, 2.0 * std::sqrt(k * r.nodes[i]));
  EXPECT_NEAR(s / std::exp(k), 1.0, 1e-12);  // integral I0(2 sqrt(Kx)) e^{-x} = e^K
}

TEST(GaussLegendre, PolynomialExactness) {
  const quad::Rule r = quad::gauss_legendre(10);
  for (int k = 0; k < 20; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], k);
    EXPECT_NEAR(s, k % 2 == 0 ? 2.0 / (k + 1) : 0.0, 1e-14) << k;
  }
}

TEST(Adaptive, VectorIntegrandWithBreakpoint) {
  auto f = [](double x) { return std::array<double, 2>{std::abs(x - 0.3), std::exp(-x)}; };
  const auto v = quad::integrate<2>(f, -1.0, 2.0, {0.3});
  EXPECT_NEAR(v[0], 0.5 * 1.3 * 1.3 + 0.5 * 1.7 * 1.7, 1e-13);
  EXPECT_NEAR(v[1], std::exp(1.0) - std::exp(-2.0), 1e-13);
}

TEST(Adaptive, SemiInfinite) {
  const double v = quad::integrate_to_infinity([](double x) { return 1.0 / (1.0 + x * x); }, 0.0);
  EXPECT_NEAR(v, std::numbers::pi / 2.0, 1e-12);
  const double g = quad::integrate_to_infinity([](double x) { return x * x * std::exp(-x); }, 1.0);
  EXPECT_NEAR(g, 5.0 * std::exp(-1.0), 1e-13);
}
