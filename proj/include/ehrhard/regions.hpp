#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ehrhard/alpha.hpp"
#include "ehrhard/extended_real.hpp"

namespace ehrhard {

// {x : <u, x> <= b}
struct HalfSpace {
  Eigen::VectorXd u;
  double b = 0.0;
};

struct Ball {
  Eigen::VectorXd center;
  double radius = 1.0;
};

// Intersection of half-spaces; an empty list is the whole space.
struct ConvexPolytope {
  int dim = 1;
  std::vector<HalfSpace> constraints;
  bool degenerate = false;
};

// Axis-aligned box; bounds may be infinite.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct BoxUnion {
  int dim = 1;
  std::vector<Box> boxes;
};

using RegionSet = std::variant<HalfSpace, Ball, ConvexPolytope, BoxUnion>;

int region_dimension(const RegionSet& r);
bool region_is_convex(const RegionSet& r);
bool region_contains(const RegionSet& r, const Eigen::VectorXd& x, double tol = 0.0);
void validate_region(const RegionSet& r);
std::string region_kind(const RegionSet& r);

struct EpsilonEnlargement {
  RegionSet base;
  double epsilon = 0.0;
};
// Exact for half-spaces, balls and 1D sets; polytopes shift each constraint (exact when bounded in 2D
// only up to rounded corners, so they are rejected).
RegionSet enlarge(const EpsilonEnlargement& e);

struct Interval {
  double lo;
  double hi;
};
// 1D sets as sorted disjoint closed intervals.
std::vector<Interval> to_intervals(const RegionSet& r);
BoxUnion from_intervals(const std::vector<Interval>& iv);

RegionSet minkowski_combine(const std::vector<double>& alphas, const std::vector<RegionSet>& regions);

// Vertices of a bounded 2D polytope in counter-clockwise order.
std::vector<Eigen::Vector2d> polygon_vertices(const ConvexPolytope& p);
ConvexPolytope polygon_from_vertices(const std::vector<Eigen::Vector2d>& v);

enum class MeasureMethodKind { Auto, ClosedForm, Quadrature, MonteCarlo };

struct MeasureMethod {
  MeasureMethodKind kind = MeasureMethodKind::Auto;
  std::size_t samples = 1000000;
  std::uint64_t seed = kDefaultSeed;

  static MeasureMethod parse(const std::string& s);
};

struct MeasureResult {
  double probability = 0.0;
  double complement = 1.0;  // 1 - probability, computed without cancellation when possible
  double error_bound = 0.0;
  std::string method;
  bool approximate = false;

  ExtendedReal probit() const;
};

MeasureResult gaussian_measure(const RegionSet& region, const MeasureMethod& method = {});

// Monte Carlo over an arbitrary membership oracle.
MeasureResult monte_carlo_measure(int dim, const std::function<bool(const Eigen::VectorXd&)>& member,
                                  std::size_t samples, std::uint64_t seed);

// Approximate membership in sum alpha_i A_i by searching grid-sampled decompositions.
bool minkowski_membership(const std::vector<double>& alphas, const std::vector<RegionSet>& regions,
                          const Eigen::VectorXd& x, int samples_per_axis = 41);

struct DeficitResult {
  ExtendedReal deficit;
  double error_budget = 0.0;
  bool approximate = false;
  MeasureResult combined;
  std::vector<MeasureResult> parts;
  std::optional<RegionSet> sum_set;
};

DeficitResult ehrhard_deficit(const AlphaSpec& spec, const std::vector<RegionSet>& regions,
                              const MeasureMethod& method = {});

}  // namespace ehrhard
