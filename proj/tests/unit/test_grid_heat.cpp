#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <sstream>

#include "ehrhard/errors.hpp"
#include "ehrhard/grid.hpp"
#include "ehrhard/heat.hpp"
#include "support/gen.hpp"

using namespace ehrhard;

namespace {

using Span = std::span<const double>;

GridFunction probit_affine_grid(const GridGeometry& g, double slope, double offset, BoundaryPolicy policy) {
  return GridFunction::sample(
      g, [=](Span x) { return phi_cdf(slope * x[0] + offset); }, RangeTag::Probability, policy);
}

double sup_inner(const GridFunction& a, const GridFunction& b, double inner) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto p = a.geometry().point(i);
    bool inside = true;
    for (int d = 0; d < a.dimension(); ++d) inside = inside && std::abs(p[d]) <= inner;
    if (inside) worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  }
  return worst;
}

// Cell-by-cell Gauss-Legendre integration of the piecewise-linear interpolant plus exact tail masses.
double cellwise_oracle(const GridFunction& f, double t, double x) {
  using GL = boost::math::quadrature::gauss<double, 20>;
  const Axis& a = f.geometry().axis(0);
  const auto& v = f.values();
  const double s = std::sqrt(t);
  double sum = v.front() * phi_cdf((a.origin - x) / s) + v.back() * phi_sf((a.upper() - x) / s);
  for (std::size_t j = 0; j + 1 < a.count; ++j) {
    const double x0 = a.coordinate(j), x1 = a.coordinate(j + 1);
    sum += GL::integrate(
        [&](double y) {
          const double w = (y - x0) / a.spacing;
          return ((1.0 - w) * v[j] + w * v[j + 1]) * phi_pdf((y - x) / s) / s;
        },
        x0, x1);
  }
  return sum;
}

}  // namespace

TEST(GridGeometryTest, IndexingRoundTrip) {
  GridGeometry g({Axis{-1.0, 0.5, 5}, Axis{0.0, 0.25, 3}});
  EXPECT_EQ(g.size(), 15u);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.flat_index(g.multi_index(i)), i);
  const auto p = g.point(g.flat_index({2, 1, 0}));
  EXPECT_DOUBLE_EQ(p[0], 0.0);
  EXPECT_DOUBLE_EQ(p[1], 0.25);
}

TEST(GridFunctionTest, ProbabilityValuesAreClamped) {
  auto g = GridGeometry::uniform(1, -1, 1, 3);
  GridFunction f(g, {0.0, 0.5, 1.0}, RangeTag::Probability);
  EXPECT_DOUBLE_EQ(f.values()[0], kProbClamp);
  EXPECT_DOUBLE_EQ(f.values()[2], 1.0 - kProbClamp);
}

TEST(GridFunctionTest, CsvRoundTrip) {
  auto g = GridGeometry::uniform(2, -2, 2, 9);
  auto f = GridFunction::sample(g, [](Span x) { return phi_cdf(x[0] - 0.3 * x[1]); }, RangeTag::Probability);
  const std::string csv = grid_csv(f);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x1,x2,value");
  std::istringstream in(csv);
  auto back = read_grid_csv(in, RangeTag::Probability, BoundaryPolicy::ConstantExtension);
  ASSERT_TRUE(back.geometry().same_as(g));
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(back.values()[i], f.values()[i]);
}

TEST(ProbitTransformTest, Examples) {
  auto g = GridGeometry::uniform(1, -3, 3, 61);
  auto half = GridFunction::sample(g, [](Span) { return 0.5; }, RangeTag::Probability);
  for (double v : probit_transform(half).values) EXPECT_EQ(v, 0.0);
  auto quad = GridFunction::sample(g, [](Span x) { return phi_cdf(1.0 - x[0] * x[0]); }, RangeTag::Probability);
  const auto F = probit_transform(quad);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.point(i)[0];
    if (1.0 - x * x < phi_inv(kProbClamp).value()) continue;
    EXPECT_NEAR(F.values[i], 1.0 - x * x, 1e-9 * std::max(1.0, x * x));
  }
  const auto back = probit_inverse(F);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(back.values()[i], quad.values()[i], 1e-12);
}

TEST(HeatEvolvePointTest, ConstantsAreFixed) {
  testgen::Gen gen(21);
  for (int i = 0; i < 20; ++i) {
    const double c = gen.uniform(0.01, 0.99);
    const double x[2] = {gen.uniform(-3, 3), gen.uniform(-3, 3)};
    EXPECT_NEAR(heat_evolve_point([c](Span) { return c; }, 2, gen.uniform(0, 5), Span(x, 2)), c, 1e-14);
  }
}

TEST(HeatEvolvePointTest, ProbitAffineClosedForm) {
  testgen::Gen gen(22);
  for (int i = 0; i < 50; ++i) {
    const int n = 1 + static_cast<int>(gen.index(2));
    double u[2] = {gen.uniform(-1.5, 1.5), gen.uniform(-1.5, 1.5)};
    if (n == 1) u[1] = 0.0;
    const double c = gen.uniform(-1, 1), t = gen.uniform(0.1, 3);
    const double x[2] = {gen.uniform(-2, 2), gen.uniform(-2, 2)};
    auto f = [&](Span y) { return phi_cdf(u[0] * y[0] + (n == 2 ? u[1] * y[1] : 0.0) + c); };
    const double r2 = u[0] * u[0] + u[1] * u[1];
    const double want = phi_cdf((u[0] * x[0] + (n == 2 ? u[1] * x[1] : 0.0) + c) / std::sqrt(1.0 + t * r2));
    EXPECT_NEAR(heat_evolve_point(f, n, t, Span(x, n)), want, 1e-8);
  }
}

TEST(HeatEvolvePointTest, HalfSpaceIndicator) {
  // P_t 1{x <= b}(0) = Phi(b / sqrt(t)).
  const auto rule = QuadratureRule::composite_gaussian(2000);
  const double zero[1] = {0.0};
  for (double b : {-1.0, 0.3, 1.2}) {
    auto ind = [b](Span y) { return y[0] <= b ? 1.0 : 0.0; };
    EXPECT_NEAR(heat_evolve_point(ind, 1, 1.0, Span(zero, 1), rule), phi_cdf(b), 1e-3);
    EXPECT_NEAR(heat_evolve_point(ind, 1, 2.0, Span(zero, 1), rule), phi_cdf(b / std::sqrt(2.0)), 1e-3);
  }
}

TEST(HeatEvolvePointTest, NegativeTimeIsDomainError) {
  const double x[1] = {0.0};
  try {
    heat_evolve_point([](Span) { return 0.5; }, 1, -0.1, Span(x, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Domain);
  }
}

TEST(HatKernelTest, WeightsSumToOne) {
  Axis a{-4.0, 0.125, 65};
  testgen::Gen gen(23);
  for (int i = 0; i < 20; ++i) {
    const auto w = hat_kernel_weights(a, gen.uniform(0, 4), gen.uniform(-6, 6));
    double s = 0.0;
    for (double v : w) s += v;
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}

TEST(HatKernelTest, MatchesQuadratureOfInterpolant) {
  auto g = GridGeometry::uniform(1, -4, 4, 33);
  auto f = GridFunction::sample(g, [](Span x) { return phi_cdf(std::sin(2.0 * x[0])); }, RangeTag::Probability);
  for (double x : {-3.0, -0.4, 0.0, 1.7}) {
    const double p[1] = {x};
    const double want = cellwise_oracle(f, 0.7, x);
    EXPECT_NEAR(heat_evolve_point(f, 0.7, Span(p, 1)), want, 1e-9) << x;
  }
}

TEST(HeatEvolveGridTest, IdentityAndConstants) {
  auto g = GridGeometry::uniform(2, -3, 3, 25);
  auto f = GridFunction::sample(g, [](Span x) { return phi_cdf(x[0] * x[1] * 0.2); }, RangeTag::Probability);
  auto same = heat_evolve_grid(f, 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(same.values()[i], f.values()[i]);
  auto c = GridFunction::sample(g, [](Span) { return 0.37; }, RangeTag::Probability);
  const auto pc = heat_evolve_grid(c, 2.5);
  for (double v : pc.values()) EXPECT_NEAR(v, 0.37, 1e-14);
}

TEST(HeatEvolveGridTest, ProbitAffineAffineTail) {
  auto g = GridGeometry::uniform(1, -8, 8, 257);
  auto f = probit_affine_grid(g, 0.3, 0.1, BoundaryPolicy::AffineTail);
  auto out = heat_evolve_grid(f, 2.0);
  const double s = std::sqrt(1.0 + 2.0 * 0.09);
  const double zone = 4.0 * std::sqrt(2.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.point(i)[0];
    if (8.0 - std::abs(x) < zone) continue;
    EXPECT_NEAR(out.values()[i], phi_cdf((0.3 * x + 0.1) / s), 1e-6) << x;
    EXPECT_NEAR(out.probit_at(Span(&x, 1)), (0.3 * x + 0.1) / s, 1e-6) << x;
  }
}

TEST(HeatEvolveGridTest, SemigroupProperty) {
  auto g = GridGeometry::uniform(1, -8, 8, 257);
  testgen::Gen gen(24);
  for (int k = 0; k < 5; ++k) {
    const double a = gen.uniform(0.2, 1.0), c = gen.uniform(-1, 1), w = gen.uniform(0.5, 2.0);
    auto f = GridFunction::sample(
        g, [&](Span x) { return phi_cdf(c + a * std::sin(w * x[0]) - 0.1 * x[0] * x[0]); }, RangeTag::Probability);
    for (double s : {0.25, 0.5, 1.0})
      for (double t : {0.25, 0.5, 1.0}) {
        auto lhs = heat_evolve_grid(heat_evolve_grid(f, t), s);
        auto rhs = heat_evolve_grid(f, s + t);
        EXPECT_LE(sup_inner(lhs, rhs, 4.0), 5e-4) << s << " " << t;
      }
  }
}

TEST(HeatEvolveGridTest, MonotoneAndRangePreserving) {
  auto g = GridGeometry::uniform(1, -6, 6, 121);
  testgen::Gen gen(25);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> lo(g.size()), hi(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      lo[i] = gen.uniform(0.05, 0.9);
      hi[i] = std::min(0.95, lo[i] + gen.uniform(0.0, 0.2));
    }
    GridFunction f(g, lo, RangeTag::Probability), h(g, hi, RangeTag::Probability);
    const double t = gen.uniform(0.1, 3.0);
    auto pf = heat_evolve_grid(f, t), ph = heat_evolve_grid(h, t);
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_LE(pf.values()[i], ph.values()[i] + 1e-10);
      EXPECT_GE(pf.values()[i], 0.05 - 1e-12);
      EXPECT_LE(ph.values()[i], 0.95 + 1e-12);
    }
  }
}

TEST(HeatEvolveGridTest, ProbitConcavityPreserved) {
  auto g = GridGeometry::uniform(1, -8, 8, 257);
  testgen::Gen gen(26);
  for (int k = 0; k < 10; ++k) {
    const double c = gen.uniform(-1, 1), u = gen.uniform(-0.5, 0.5), q = gen.uniform(0.1, 1.0);
    auto f = GridFunction::sample(g, [&](Span x) { return phi_cdf(c + u * x[0] - q * x[0] * x[0]); },
                                  RangeTag::Probability);
    for (double t : {0.5, 1.0, 2.0}) {
      const auto F = probit_transform(heat_evolve_grid(f, t)).values;
      const double zone = 4.0 * std::sqrt(t);
      for (std::size_t i = 1; i + 1 < g.size(); ++i) {
        if (8.0 - std::abs(g.point(i)[0]) < zone) continue;
        EXPECT_LE(F[i + 1] - 2.0 * F[i] + F[i - 1], 1e-6) << k << " " << t << " " << i;
      }
    }
  }
}

TEST(HeatResidualTest, ConstantIsRoundoffZero) {
  auto g = GridGeometry::uniform(1, -4, 4, 129);
  auto f = GridFunction::sample(g, [](Span) { return 0.25; }, RangeTag::Probability);
  EXPECT_LE(heat_pde_residual(f, 0.5, 1e-3, 1.0 / 16).max_abs, 1e-12);
}

TEST(HeatResidualTest, ProbitAffineSmall) {
  auto g = GridGeometry::uniform(1, -8, 8, 1025);
  auto f = probit_affine_grid(g, 0.3, 0.1, BoundaryPolicy::ConstantExtension);
  auto r = heat_pde_residual(f, 1.0, 1e-3, 1.0 / 64);
  EXPECT_GT(r.interior_count, 0u);
  EXPECT_LE(r.max_abs, 1e-6);
}

TEST(HeatResidualTest, SecondOrderConvergence) {
  auto g = GridGeometry::uniform(1, -8, 8, 1025);
  auto f = GridFunction::sample(g, [](Span x) { return phi_cdf(1.0 - x[0] * x[0]); }, RangeTag::Probability);
  const double zone = 4.0 * std::sqrt(1.04);
  const double coarse = heat_pde_residual(f, 1.0, 0.04, 1.0 / 4, default_rule(), zone).max_abs;
  const double fine = heat_pde_residual(f, 1.0, 0.02, 1.0 / 8, default_rule(), zone).max_abs;
  EXPECT_GE(coarse / fine, 3.5) << coarse << " " << fine;
}

TEST(HeatResidualTest, QuadraticProbitExample) {
  auto g = GridGeometry::uniform(1, -4, 4, 513);
  auto f = GridFunction::sample(g, [](Span x) { return phi_cdf(1.0 - x[0] * x[0]); }, RangeTag::Probability);
  EXPECT_LT(heat_pde_residual(f, 0.5, 1e-3, 1.0 / 64).max_abs, 1e-3);
}

TEST(HeatResidualTest, BadStencilIsConfigError) {
  auto g = GridGeometry::uniform(1, -1, 1, 9);
  try {
    heat_pde_residual(GridFunction::sample(g, [](Span) { return 0.5; }, RangeTag::Probability), 0.5, 1e-3, 0.3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
  }
  try {
    heat_pde_residual(GridFunction::sample(g, [](Span) { return 0.5; }, RangeTag::Probability), 0.5, 1e-3, 1.25);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
  }
}

namespace {

double probit_residual(const GridFunction& f, double t, double dt, double h, double zone) {
  auto F = [&](double s) { return probit_transform(heat_evolve_grid(f, s)); };
  return probit_pde_residual(F(t - dt), F(t), F(t + dt), dt, h, zone).max_abs;
}

}  // namespace

TEST(ProbitResidualTest, HalfIsStationary) {
  auto g = GridGeometry::uniform(1, -4, 4, 65);
  auto f = GridFunction::sample(g, [](Span) { return 0.5; }, RangeTag::Probability);
  EXPECT_LE(probit_residual(f, 1.0, 1e-3, 0.125, 0.0), 1e-12);
}

TEST(ProbitResidualTest, ProbitAffineSmall) {
  auto g = GridGeometry::uniform(1, -8, 8, 257);
  auto f = probit_affine_grid(g, 0.3, 0.1, BoundaryPolicy::AffineTail);
  EXPECT_LE(probit_residual(f, 1.0, 1e-3, 1.0 / 16, 4.0 * std::sqrt(1.001)), 1e-6);
}

TEST(ProbitResidualTest, SecondOrderConvergence) {
  auto g = GridGeometry::uniform(1, -4, 4, 513);
  auto f = GridFunction::sample(g, [](Span x) { return phi_cdf(1.0 - x[0] * x[0]); }, RangeTag::Probability);
  const double zone = 4.0 * std::sqrt(0.27);
  const double coarse = probit_residual(f, 0.25, 0.02, 1.0 / 16, zone);
  const double fine = probit_residual(f, 0.25, 0.01, 1.0 / 32, zone);
  EXPECT_GE(coarse / fine, 3.5) << coarse << " " << fine;
}

TEST(ProbitResidualTest, NonFiniteIsDomainError) {
  auto g = GridGeometry::uniform(1, -1, 1, 9);
  ProbitField F{g, std::vector<double>(9, 0.0)};
  ProbitField bad = F;
  bad.values[4] = -INFINITY;
  try {
    probit_pde_residual(F, bad, F, 1e-3, 0.25, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Domain);
  }
}

TEST(TailConditionTest, Examples) {
  auto g = GridGeometry::uniform(1, -5, 5, 101);
  auto f = GridFunction::sample(g, [](Span x) { return phi_cdf(1.0 - x[0] * x[0]); }, RangeTag::Probability);
  auto h = GridFunction::sample(g, [](Span) { return phi_cdf(0.2); }, RangeTag::Probability);
  auto r = tail_condition_check({f, f}, h, {1.0, 1.0}, {0.05, 0.05});
  EXPECT_TRUE(r.all_satisfied);
  EXPECT_LE(r.f_shell_max[0], kProbClamp);
  auto big = GridFunction::sample(g, [](Span) { return 0.9; }, RangeTag::Probability);
  auto bad = tail_condition_check({big}, h, {0.0}, {1.0});
  EXPECT_FALSE(bad.f_satisfied[0]);
  EXPECT_FALSE(bad.all_satisfied);
}
