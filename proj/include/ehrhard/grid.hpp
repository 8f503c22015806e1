#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ehrhard/gaussian.hpp"

namespace ehrhard {

inline constexpr double kProbClamp = 1e-12;

struct Axis {
  double origin = 0.0;
  double spacing = 1.0;
  std::size_t count = 1;

  double coordinate(std::size_t i) const { return origin + spacing * static_cast<double>(i); }
  double upper() const { return coordinate(count - 1); }
};

class GridGeometry {
 public:
  GridGeometry() = default;
  explicit GridGeometry(std::vector<Axis> axes);
  // Same [lo, hi] with `count` points on every axis.
  static GridGeometry uniform(int dimension, double lo, double hi, std::size_t count);

  int dimension() const { return static_cast<int>(axes_.size()); }
  std::size_t size() const { return size_; }
  const std::vector<Axis>& axes() const { return axes_; }
  const Axis& axis(int d) const { return axes_[d]; }

  std::array<std::size_t, 3> multi_index(std::size_t flat) const;
  std::size_t flat_index(const std::array<std::size_t, 3>& idx) const;
  std::array<double, 3> point(std::size_t flat) const;
  // Signed distance to the box boundary (negative outside).
  double distance_to_boundary(std::span<const double> x) const;
  bool contains(std::span<const double> x, double slack = 1e-12) const;
  bool same_as(const GridGeometry& other, double tol = 1e-12) const;
  std::size_t stride(int d) const;

 private:
  std::vector<Axis> axes_;
  std::size_t size_ = 0;
};

enum class RangeTag { Probability, Real };
enum class BoundaryPolicy { ConstantExtension, AffineTail };

const char* range_name(RangeTag r);
const char* policy_name(BoundaryPolicy p);
RangeTag parse_range(const std::string& s);
BoundaryPolicy parse_policy(const std::string& s);

// Multilinear interpolation; outside the box either clamps or extrapolates from the boundary cell.
double multilinear(const GridGeometry& g, const std::vector<double>& values, std::span<const double> x,
                   bool extrapolate);

class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(GridGeometry geometry, std::vector<double> values, RangeTag range,
               BoundaryPolicy policy = BoundaryPolicy::ConstantExtension);

  static GridFunction sample(const GridGeometry& geometry, const Evaluable& f, RangeTag range,
                             BoundaryPolicy policy = BoundaryPolicy::ConstantExtension);

  const GridGeometry& geometry() const { return geometry_; }
  const std::vector<double>& values() const { return values_; }
  RangeTag range() const { return range_; }
  BoundaryPolicy policy() const { return policy_; }
  int dimension() const { return geometry_.dimension(); }
  std::size_t size() const { return values_.size(); }

  // Interpolant extended off-grid according to the boundary policy.
  double value_at(std::span<const double> x) const;
  // Probit of the interpolant; for affine-tail probability grids this is the probit-space interpolant.
  double probit_at(std::span<const double> x) const;
  Evaluable as_evaluable() const;
  GridFunction with_policy(BoundaryPolicy policy) const;

 private:
  GridGeometry geometry_;
  std::vector<double> values_;
  std::vector<double> transformed_;
  RangeTag range_ = RangeTag::Probability;
  BoundaryPolicy policy_ = BoundaryPolicy::ConstantExtension;
};

// Extended-real values on a grid geometry.
struct ProbitField {
  GridGeometry geometry;
  std::vector<double> values;

  double interpolate(std::span<const double> x) const { return multilinear(geometry, values, x, true); }
};

void write_grid_csv(const GridFunction& f, std::ostream& out);
std::string grid_csv(const GridFunction& f);
// Reads `x1[,x2[,x3]],value` rows and infers the geometry.
GridFunction read_grid_csv(std::istream& in, RangeTag range, BoundaryPolicy policy);

std::string format17(double v);

}  // namespace ehrhard
