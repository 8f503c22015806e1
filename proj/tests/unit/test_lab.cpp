#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ehrhard/errors.hpp"
#include "ehrhard/lab.hpp"
#include "support/specs.hpp"

using namespace ehrhard;

namespace {

using Span = std::span<const double>;

GridGeometry line(double half_width, double spacing) {
  return GridGeometry::uniform(1, -half_width, half_width,
                               static_cast<std::size_t>(std::llround(2 * half_width / spacing)) + 1);
}

GridFunction probit_grid(const GridGeometry& g, std::function<double(double)> F) {
  return GridFunction::sample(
      g, [F](Span x) { return phi_cdf(F(x[0])); }, RangeTag::Probability, BoundaryPolicy::AffineTail);
}

HypothesisInstance constant_instance(const AlphaSpec& spec, double h, double f) {
  HypothesisInstance inst;
  inst.spec = spec;
  const auto g = line(4, 0.125);
  inst.h = probit_grid(g, [h](double) { return h; });
  inst.f_list.assign(spec.m(), probit_grid(g, [f](double) { return f; }));
  return inst;
}

HypothesisInstance affine_instance(const AlphaSpec& spec, double u, const std::vector<double>& c) {
  HypothesisInstance inst;
  inst.spec = spec;
  const auto g = line(8, 1.0 / 16);
  double cs = 0.0;
  for (std::size_t i = 0; i < spec.m(); ++i) {
    inst.f_list.push_back(probit_grid(g, [=](double x) { return u * x + c[i]; }));
    cs += spec.alpha[i] * c[i];
  }
  inst.h = probit_grid(g, [=](double x) { return u * x + cs; });
  inst.plan.slot_boxes.assign(spec.m(), AxisBox::cube(1, 2.0));
  return inst;
}

}  // namespace

TEST(HypothesisMarginTest, Examples) {
  AlphaSpec half({0.5, 0.5}, {});
  EXPECT_NEAR(hypothesis_margin(constant_instance(half, 0.0, 0.0)).min_margin, 0.0, 1e-15);
  EXPECT_NEAR(hypothesis_margin(constant_instance(half, 1.0, 2.0)).min_margin, -1.0, 1e-12);
  const auto r = hypothesis_margin(affine_instance(AlphaSpec({0.7, 0.6}, {}), 0.4, {0.2, -0.5}));
  EXPECT_NEAR(r.min_margin, 0.0, 1e-9);
  EXPECT_GT(r.evaluated, 0u);
}

TEST(HypothesisMarginTest, ConvexSlotNeedsConcaveProbit) {
  HypothesisInstance inst = affine_instance(AlphaSpec({0.5, 0.5}, {0}), 0.3, {0.0, 0.0});
  inst.f_list[0] = probit_grid(inst.f_list[0].geometry(), [](double x) { return 0.1 * x * x; });
  EXPECT_THROW(hypothesis_margin(inst), Error);
}

TEST(HypothesisMarginTest, SmoothFamilyPremiseHolds) {
  testgen::Gen g(51);
  std::mt19937_64 rng(51);
  for (int k = 0; k < 10; ++k) {
    const auto spec = testgen::random_feasible_spec(g, 3);
    const auto inst = smooth_family_instance(spec, random_smooth_params(spec.m(), rng));
    EXPECT_GE(hypothesis_margin(inst).min_margin, -1e-9) << k;
  }
}

TEST(PreservationTest, EqualityFamily) {
  const auto rep = preservation_check(affine_instance(AlphaSpec({0.5, 0.5}, {}), 0.5, {0.3, -0.1}), {1.0});
  ASSERT_EQ(rep.per_t.size(), 1u);
  EXPECT_GE(rep.per_t[0].min_C, -1e-6);
  EXPECT_LE(rep.per_t[0].min_C, 1e-6);
}

TEST(PreservationTest, ConstantsStayZero) {
  const auto rep = preservation_check(constant_instance(AlphaSpec({0.5, 0.5}, {}), 0.3, 0.3), {0.25, 1.0, 4.0});
  for (const auto& s : rep.per_t) {
    EXPECT_NEAR(s.min_C, 0.0, 1e-12);
    ASSERT_TRUE(s.origin_C.has_value());
    EXPECT_NEAR(*s.origin_C, 0.0, 1e-12);
  }
}

TEST(PreservationTest, EmptyTimeList) {
  const auto rep = preservation_check(constant_instance(AlphaSpec({1.0}, {}), 0.0, 0.0), {});
  EXPECT_TRUE(rep.per_t.empty());
}

TEST(PreservationTest, FeasibleSmoothFamilies) {
  testgen::Gen g(52);
  std::mt19937_64 rng(52);
  for (int k = 0; k < 8; ++k) {
    const auto spec = testgen::random_feasible_spec(g, 3);
    const auto inst = smooth_family_instance(spec, random_smooth_params(spec.m(), rng));
    for (const auto& s : preservation_check(inst, {0.25, 1.0, 4.0}).per_t) EXPECT_GE(s.min_C, -1e-4) << k << " " << s.t;
  }
}

TEST(PreservationTest, DeficitCsvLayout) {
  PreservationOptions opt;
  opt.record_field = true;
  opt.max_records = 5;
  const auto rep = preservation_check(affine_instance(AlphaSpec({0.5, 0.5}, {}), 0.5, {0.0, 0.0}), {1.0}, opt);
  const std::string csv = deficit_csv(rep.field);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,x1,x2,C");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST(CounterexampleTest, IntegralAgainstQuadrature) {
  const auto rule = QuadratureRule::composite_gaussian(4000);
  for (double a : {1.0, 2.0, 4.0}) {
    const double want = gamma_integral([a](Span x) { return phi_cdf(1.0 - a * a * x[0] * x[0]); }, 1, rule);
    EXPECT_NEAR(counterexample_integral(a, 1), want, 1e-9) << a;
  }
  const double want2 = gamma_integral([](Span x) { return phi_cdf(1.0 - 4.0 * (x[0] * x[0] + x[1] * x[1])); }, 2,
                                      QuadratureRule::composite_gaussian(400));
  EXPECT_NEAR(counterexample_integral(2.0, 2), want2, 1e-6);
}

TEST(CounterexampleTest, SumBelowOne) {
  const auto cx = build_counterexample(AlphaSpec({0.4, 0.4}, {}));
  EXPECT_EQ(cx.branch, "sum-below-one");
  EXPECT_DOUBLE_EQ(cx.a, 2.0);
  const double zero = 0.0;
  EXPECT_NEAR(cx.instance.f_list[0].value_at(Span(&zero, 1)), phi_cdf(1.0), 1e-12);
  EXPECT_LT(cx.integral_f, 0.5);
  EXPECT_GE(hypothesis_margin(cx.instance).min_margin, -1e-9);
  const double C = deficit_at_origin(cx.instance, 1.0, cx.rule);
  EXPECT_LE(C, -1e-3);
  EXPECT_NEAR(C, cx.predicted_C, 1e-3);
}

TEST(CounterexampleTest, DominantIndex) {
  const auto cx = build_counterexample(AlphaSpec({3.0, 1.0}, {}));
  EXPECT_EQ(cx.branch, "dominant-index");
  ASSERT_TRUE(cx.dominant.has_value());
  EXPECT_EQ(*cx.dominant, 0u);
  EXPECT_GE(hypothesis_margin(cx.instance).min_margin, -1e-9);
  const double C = deficit_at_origin(cx.instance, 1.0, cx.rule);
  EXPECT_LE(C, -1e-3);
  EXPECT_NEAR(C, cx.predicted_C, 1e-3);
}

TEST(CounterexampleTest, Errors) {
  try {
    build_counterexample(AlphaSpec({0.5, 0.5}, {}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Precondition);
  }
  CounterexampleOptions o;
  o.a = 0.5;
  try {
    build_counterexample(AlphaSpec({0.4, 0.4}, {}), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Validation);
  }
}

TEST(CounterexampleTest, PremiseScaling) {
  const auto cx = build_counterexample(AlphaSpec({0.4, 0.4}, {}));
  const auto& f = cx.instance.f_list[0];
  const double floor = phi_inv(kProbClamp).value();
  testgen::Gen g(53);
  for (int k = 0; k < 5000; ++k) {
    const double x = g.uniform(-8, 8), t = g.unit();
    const double Fx = f.probit_at(Span(&x, 1));
    if (Fx <= floor + 1e-9) continue;
    const double tx = t * x;
    EXPECT_GE(f.probit_at(Span(&tx, 1)) - t * Fx, -1e-9) << x << " " << t;
  }
}

TEST(CounterexampleTest, RandomInfeasibleSpecs) {
  testgen::Gen g(54);
  for (int k = 0; k < 6; ++k) {
    const auto spec = testgen::random_infeasible_spec(g, k % 2 == 0, 3);
    const auto cx = build_counterexample(spec);
    EXPECT_GE(hypothesis_margin(cx.instance).min_margin, -1e-9) << k;
    EXPECT_LE(deficit_at_origin(cx.instance, 1.0, cx.rule), -1e-3) << k;
  }
}

TEST(ApproximantTest, IntervalExample) {
  BoxUnion iv;
  iv.dim = 1;
  iv.boxes = {{Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0)}};
  const auto ap = phi_concave_approximant(iv, 0.3, -3.0, 2.0, line(3, 1.0 / 100));
  const double zero = 0.0, out = 1.4;
  EXPECT_NEAR(ap.f.value_at(Span(&zero, 1)), phi_cdf(2.0), 1e-12);
  EXPECT_LE(ap.f.value_at(Span(&out, 1)), phi_cdf(-3.0) + 1e-15);
  EXPECT_LE(max_probit_second_difference(ap.f), 1e-8);
  for (std::size_t i = 0; i < ap.f.size(); ++i) {
    const double x = ap.f.geometry().point(i)[0];
    if (std::abs(x) <= 1.0) EXPECT_NEAR(ap.F.values[i], 2.0, 1e-12) << x;
    if (std::abs(x) >= 1.3) EXPECT_LE(ap.F.values[i], -3.0 + 1e-12) << x;
  }
}

TEST(ApproximantTest, WholeSpace) {
  ConvexPolytope whole;
  whole.dim = 1;
  const auto ap = phi_concave_approximant(whole, 0.3, -3.0, 1.5, line(2, 0.25));
  for (double v : ap.f.values()) EXPECT_NEAR(v, phi_cdf(1.5), 1e-15);
}

TEST(ApproximantTest, DiskIsProbitConcave) {
  Ball disk{Eigen::Vector2d(0.2, -0.1), 1.0};
  const auto ap = phi_concave_approximant(disk, 0.4, -2.0, 1.0, GridGeometry::uniform(2, -2, 2, 41));
  EXPECT_LE(max_probit_second_difference(ap.f), 1e-8);
  const double c[2] = {0.2, -0.1};
  EXPECT_NEAR(ap.f.probit_at(Span(c, 2)), 1.0, 1e-9);
}

TEST(ApproximantTest, DegenerateRegion) {
  BoxUnion pt;
  pt.dim = 1;
  pt.boxes = {{Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Constant(1, 0.5)}};
  try {
    phi_concave_approximant(pt, 0.3, -3.0, 2.0, line(2, 0.25));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Degenerate);
  }
}

TEST(ApproximantTest, TrendInLowerLevel) {
  BoxUnion iv;
  iv.dim = 1;
  iv.boxes = {{Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0)}};
  const auto tr = approximant_trend(iv, {0.3, 0.3, 0.3}, {-2.0, -3.0, -4.0}, {2.0, 2.0, 2.0}, line(6, 1.0 / 64));
  ASSERT_EQ(tr.size(), 3u);
  EXPECT_GE(tr[0].integral, tr[1].integral);
  EXPECT_GE(tr[1].integral, tr[2].integral);
}

TEST(EpigraphLiftTest, HalfIsHalfSpace) {
  const auto f = probit_grid(line(8, 0.125), [](double) { return 0.0; });
  const double x = 0.7;
  const auto lift = epigraph_lift(f, 1.0, Span(&x, 1));
  EXPECT_NEAR(lift.lift_measure, 0.5, 1e-9);
  EXPECT_TRUE(lift.consistent);
}

TEST(EpigraphLiftTest, ProbitAffineClosedForm) {
  const auto f = probit_grid(line(8, 0.125), [](double y) { return 0.4 * y - 0.2; });
  const double x = 0.5, t = 1.5;
  const auto lift = epigraph_lift(f, t, Span(&x, 1));
  EXPECT_NEAR(lift.lift_measure, phi_cdf((0.4 * x - 0.2) / std::sqrt(1 + t * 0.16)), 1e-6);
  ASSERT_TRUE(lift.convexity.has_value());
  EXPECT_EQ(lift.convexity->failures, 0u);
}

TEST(EpigraphLiftTest, QuadraticProbit) {
  const auto f = probit_grid(line(8, 1.0 / 32), [](double y) { return 1.0 - y * y; });
  const double x = 0.0;
  const auto lift = epigraph_lift(f, 1.0, Span(&x, 1));
  EXPECT_NEAR(lift.lift_measure, heat_evolve_point(f, 1.0, Span(&x, 1)), 1e-4);
  EXPECT_TRUE(lift.probit_concave);
  ASSERT_TRUE(lift.convexity.has_value());
  EXPECT_EQ(lift.convexity->failures, 0u);
  EXPECT_LT(lift.convexity->skipped, lift.convexity->pairs / 2);
}

TEST(EpigraphLiftTest, RandomConcaveProfiles) {
  testgen::Gen g(55);
  for (int k = 0; k < 10; ++k) {
    const double c = g.uniform(-1, 1), u = g.uniform(-0.5, 0.5), q = g.uniform(0.0, 0.5);
    const auto f = probit_grid(line(8, 1.0 / 32), [=](double y) { return c + u * y - q * y * y; });
    const double x = g.uniform(-1, 1), t = g.uniform(0.25, 2);
    const auto lift = epigraph_lift(f, t, Span(&x, 1));
    EXPECT_LE(lift.discrepancy, 1e-4) << k;
    ASSERT_TRUE(lift.convexity.has_value());
    EXPECT_EQ(lift.convexity->failures, 0u) << k;
  }
}

TEST(EpigraphLiftTest, DimensionLimit) {
  const auto g3 = GridGeometry::uniform(3, -1, 1, 5);
  const auto f = GridFunction::sample(g3, [](Span) { return 0.5; }, RangeTag::Probability);
  const double x[3] = {0, 0, 0};
  try {
    epigraph_lift(f, 1.0, Span(x, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unsupported);
  }
}
