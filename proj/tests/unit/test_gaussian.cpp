#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>

#include "ehrhard/errors.hpp"
#include "ehrhard/extended_real.hpp"
#include "ehrhard/gaussian.hpp"
#include "support/gen.hpp"

using namespace ehrhard;

namespace {

long double oracle_cdf(long double x) { return 0.5L * std::erfc(-x / std::sqrt(2.0L)); }

double oracle_quantile(double p) { return boost::math::quantile(boost::math::normal_distribution<double>(), p); }

double double_factorial(int k) {
  double r = 1.0;
  for (int j = k; j > 1; j -= 2) r *= j;
  return r;
}

}  // namespace

TEST(ExtendedRealTest, OppositeInfinitiesSumToMinusInfinity) {
  EXPECT_TRUE((ExtendedReal::pos_inf() + ExtendedReal::neg_inf()).is_neg_inf());
  EXPECT_TRUE((ExtendedReal::neg_inf() + ExtendedReal::pos_inf()).is_neg_inf());
  EXPECT_TRUE((ExtendedReal::pos_inf() - ExtendedReal::pos_inf()).is_neg_inf());
  EXPECT_TRUE(std::isinf(ext_add(INFINITY, -INFINITY)) && ext_add(INFINITY, -INFINITY) < 0);
  EXPECT_EQ((ExtendedReal(1.5) + ExtendedReal(2.0)).value(), 3.5);
  EXPECT_TRUE((ExtendedReal(3.0) + ExtendedReal::pos_inf()).is_pos_inf());
  EXPECT_TRUE(scale(0.5, ExtendedReal::neg_inf()).is_neg_inf());
}

TEST(PhiTest, KnownValues) {
  EXPECT_DOUBLE_EQ(phi_cdf(0.0), 0.5);
  EXPECT_EQ(phi_cdf(std::numeric_limits<double>::infinity()), 1.0);
  EXPECT_EQ(phi_cdf(-std::numeric_limits<double>::infinity()), 0.0);
  EXPECT_NEAR(phi_cdf(1.0), static_cast<double>(oracle_cdf(1.0L)), 1e-16);
  EXPECT_NEAR(phi_cdf(1.0), 0.841344746068543, 1e-15);
}

TEST(PhiTest, AgreesWithLongDoubleOracle) {
  for (double x = -8.0; x <= 8.0; x += 0.03125) {
    const double want = static_cast<double>(oracle_cdf(x));
    EXPECT_NEAR(phi_cdf(x), want, 1e-15 + 1e-14 * want) << x;
  }
}

TEST(PhiTest, SymmetryProperty) {
  testgen::Gen g(11);
  for (int i = 0; i < 2000; ++i) {
    const double x = g.uniform(-8.0, 8.0);
    EXPECT_NEAR(phi_cdf(-x), 1.0 - phi_cdf(x), 1e-15) << x;
    EXPECT_NEAR(phi_sf(x), phi_cdf(-x), 1e-15) << x;
  }
}

TEST(PhiInvTest, KnownValues) {
  EXPECT_EQ(phi_inv(0.5).value(), 0.0);
  EXPECT_TRUE(phi_inv(0.0).is_neg_inf());
  EXPECT_TRUE(phi_inv(1.0).is_pos_inf());
  EXPECT_NEAR(phi_inv(0.841344746).value(), 1.0, 1e-9);
}

TEST(PhiInvTest, AgreesWithBoostQuantile) {
  testgen::Gen g(12);
  for (int i = 0; i < 2000; ++i) {
    const double p = std::pow(10.0, g.uniform(-14.0, -0.31));
    const double want = oracle_quantile(p);
    EXPECT_NEAR(phi_inv(p).value(), want, 1e-12 * std::max(1.0, std::abs(want))) << p;
    EXPECT_NEAR(phi_inv(1.0 - p).value(), oracle_quantile(1.0 - p), 1e-9) << p;
  }
}

TEST(PhiInvTest, DomainErrors) {
  for (double p : {-0.1, 1.0000001, std::numeric_limits<double>::quiet_NaN()}) {
    try {
      phi_inv(p);
      FAIL() << p;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::Domain);
    }
  }
}

TEST(PhiInvTest, StrictlyIncreasing) {
  double prev = -std::numeric_limits<double>::infinity();
  for (int i = 1; i < 100000; ++i) {
    const double v = phi_inv(i / 100000.0).value();
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(PhiInvTest, RoundTrip) {
  // Relative error of Phi near 1 is amplified by 1/(x phi(x)) in the upper tail.
  for (double x = -6.0; x <= 6.0; x += 0.01) {
    const double p = phi_cdf(x);
    const double eps = std::numeric_limits<double>::epsilon();
    const double cond = x > 0 ? eps * p / phi_pdf(x) : 0.0;
    EXPECT_NEAR(phi_inv(p).value(), x, 1e-12 + 4.0 * cond) << x;
  }
}

TEST(QuadratureTest, GaussHermiteMoments) {
  for (int order : {8, 16, 32, 64}) {
    const auto rule = QuadratureRule::gauss_hermite(order);
    ASSERT_EQ(rule.size(), static_cast<std::size_t>(order));
    for (int k = 0; k <= 2 * order - 1; ++k) {
      long double s = 0.0L;
      for (std::size_t i = 0; i < rule.size(); ++i) s += rule.weights[i] * std::pow(static_cast<long double>(rule.nodes[i]), k);
      const double want = k % 2 ? 0.0 : double_factorial(k - 1);
      // Moments grow like (k-1)!!; the check is relative to the integrand scale.
      long double scale = 0.0L;
      for (std::size_t i = 0; i < rule.size(); ++i) scale += rule.weights[i] * std::pow(std::abs(static_cast<long double>(rule.nodes[i])), k);
      EXPECT_NEAR(static_cast<double>(s), want, 1e-12 * static_cast<double>(scale) + 1e-14) << order << " " << k;
    }
  }
}

TEST(QuadratureTest, CompositeRuleMoments) {
  const auto rule = QuadratureRule::composite_gaussian(400);
  for (int k = 0; k <= 8; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) s += rule.weights[i] * std::pow(rule.nodes[i], k);
    EXPECT_NEAR(s, k % 2 ? 0.0 : double_factorial(k - 1), 1e-12) << k;
  }
}

TEST(GammaIntegralTest, Examples) {
  const auto& gh = default_rule();
  for (int n : {1, 2, 3}) EXPECT_NEAR(gamma_integral([](auto) { return 1.0; }, n, gh), 1.0, 1e-13);
  EXPECT_NEAR(gamma_integral([](std::span<const double> x) { return x[0] * x[0]; }, 2, gh), 1.0, 1e-13);
  auto indicator = [](std::span<const double> x) { return x[0] <= 0.7 ? 1.0 : 0.0; };
  EXPECT_NEAR(gamma_integral(indicator, 1, QuadratureRule::composite_gaussian(400)), phi_cdf(0.7), 1e-3);
}

TEST(GammaIntegralTest, GaussianMomentGenerating) {
  testgen::Gen g(13);
  for (int i = 0; i < 50; ++i) {
    const double s = g.uniform(-1.5, 1.5);
    const double v = gamma_integral([s](std::span<const double> x) { return std::exp(s * x[0]); }, 1, default_rule());
    EXPECT_NEAR(v, std::exp(0.5 * s * s), 1e-12);
  }
}
