#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ehrhard/alpha.hpp"
#include "ehrhard/grid.hpp"
#include "ehrhard/heat.hpp"
#include "ehrhard/regions.hpp"

namespace ehrhard {

// Axis-aligned sampling window; empty bounds mean the whole grid.
struct AxisBox {
  std::vector<double> lo;
  std::vector<double> hi;

  bool empty() const { return lo.empty(); }
  bool contains(std::span<const double> x) const;
  static AxisBox cube(int dim, double half_width);
};

enum class SamplingMode { Auto, Tensor, LatinHypercube };

struct SamplingPlan {
  std::vector<AxisBox> slot_boxes;  // one per slot, or empty for whole grids
  AxisBox target_box;               // window for sum alpha_i x_i
  std::size_t stride = 4;
  std::size_t max_tuples = 200000;  // tensor mode raises the stride to stay below this
  std::size_t lhs_samples = 100000;
  std::uint64_t seed = kDefaultSeed;
  SamplingMode mode = SamplingMode::Auto;
};

struct HypothesisInstance {
  AlphaSpec spec;
  GridFunction h;
  std::vector<GridFunction> f_list;
  SamplingPlan plan;

  void validate() const;
};

// Largest discrete second difference of the probit field along axes and diagonals,
// ignoring stencils that touch clamped samples.
double max_probit_second_difference(const GridFunction& f);

struct DeficitRecord {
  double t = 0.0;
  std::vector<double> x;  // slot-major, m * n entries
  double C = 0.0;
  bool outside = false;
};

struct DeficitField {
  std::size_t slots = 0;
  int dimension = 1;
  std::vector<DeficitRecord> records;
};

void write_deficit_csv(const DeficitField& field, std::ostream& out);
std::string deficit_csv(const DeficitField& field);

struct MarginReport {
  double min_margin = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  std::vector<double> argmin;
  std::size_t stride_used = 0;
  std::string mode;
};

MarginReport hypothesis_margin(const HypothesisInstance& inst);

struct TimeSummary {
  double t = 0.0;
  double min_C = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  std::vector<double> argmin;
  std::optional<double> origin_C;
};

struct PreservationReport {
  std::vector<TimeSummary> per_t;
  double zone = 0.0;
  std::size_t stride_used = 0;
  std::string mode;
  DeficitField field;
};

struct PreservationOptions {
  bool record_field = false;
  std::size_t max_records = 200000;
  const QuadratureRule* rule = nullptr;  // defaults to the order-64 Gauss-Hermite rule
};

PreservationReport preservation_check(const HypothesisInstance& inst, const std::vector<double>& t_list,
                                      const PreservationOptions& options = {});

// C(t, 0, ..., 0) from pointwise evolutions.
double deficit_at_origin(const HypothesisInstance& inst, double t, const QuadratureRule& rule = default_rule());

struct CounterexampleOptions {
  std::optional<double> a;
  int n = 1;
  double half_width = 8.0;
  double spacing = 1.0 / 64.0;
};

struct Counterexample {
  HypothesisInstance instance;
  double a = 0.0;
  double integral_f = 0.0;
  double probit_integral = 0.0;
  std::string branch;
  std::optional<std::size_t> dominant;
  double premise_slack = 0.0;
  double predicted_C = 0.0;
  QuadratureRule rule;
};

// Probit of f(x) = Phi(1 - a^2 |x|^2).
double counterexample_probit(double a, std::span<const double> x);
double counterexample_integral(double a, int n);
Counterexample build_counterexample(const AlphaSpec& spec, const CounterexampleOptions& options = {});

struct SmoothFamilyParams {
  std::vector<double> offsets;     // c_i
  std::vector<double> curvatures;  // q_i >= 0
  double slope = 0.0;              // u, shared by all slots
  double half_width = 12.0;
  double spacing = 1.0 / 32.0;
  double sample_half_width = 4.0;
};

// F_i(x) = c_i + u x - q_i x^2 and the tightest H admitted by the premise, plus the
// interpolation slack so the sampled premise holds.
HypothesisInstance smooth_family_instance(const AlphaSpec& spec, const SmoothFamilyParams& params);
SmoothFamilyParams random_smooth_params(std::size_t m, std::mt19937_64& rng);

struct ConcaveApproximant {
  GridFunction f;
  ProbitField F;  // unclamped probit values
  double c = 0.0;
  double rho_min = 0.0;
  std::vector<double> center;
};

double signed_distance(const RegionSet& region, const Eigen::VectorXd& x);
ConcaveApproximant phi_concave_approximant(const RegionSet& region, double eps, double a, double b,
                                           const GridGeometry& geometry);

struct TrendPoint {
  double eps = 0.0, a = 0.0, b = 0.0;
  double integral = 0.0;
};
std::vector<TrendPoint> approximant_trend(const RegionSet& region, const std::vector<double>& eps_list,
                                          const std::vector<double>& a_list, const std::vector<double>& b_list,
                                          const GridGeometry& geometry);

struct MidpointReport {
  std::size_t pairs = 0;
  std::size_t skipped = 0;  // pairs reaching cells with clamped samples or a flat extension
  std::size_t failures = 0;
  double worst = 0.0;
};

struct EpigraphLift {
  GridFunction source;
  double t = 0.0;
  std::vector<double> x;
  int dimension = 2;
  GridGeometry profile_geometry;
  std::vector<double> profile;
  double lift_measure = 0.0;
  double evolve_value = 0.0;
  double discrepancy = 0.0;
  bool consistent = false;
  bool probit_concave = false;
  std::optional<MidpointReport> convexity;

  double profile_at(std::span<const double> y) const;
  bool contains(double u, std::span<const double> y) const { return u <= profile_at(y); }
};

EpigraphLift epigraph_lift(const GridFunction& f, double t, std::span<const double> x,
                           const QuadratureRule& rule = default_rule(), std::size_t profile_points = 4001);
MidpointReport lift_midpoint_test(const EpigraphLift& lift, std::size_t pairs, std::uint64_t seed, double tol = 1e-9);

}  // namespace ehrhard
