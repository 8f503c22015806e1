#include "ehrhard/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "ehrhard/errors.hpp"

namespace ehrhard {

GridGeometry::GridGeometry(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty() || axes_.size() > 3) fail(ErrorCode::InvalidArgument, "grid dimension must be 1, 2 or 3");
  size_ = 1;
  for (const Axis& a : axes_) {
    if (a.count < 1) fail(ErrorCode::InvalidArgument, "grid axis needs at least one point");
    if (!(a.spacing > 0.0) || !std::isfinite(a.spacing) || !std::isfinite(a.origin))
      fail(ErrorCode::InvalidArgument, "grid spacing must be positive and finite");
    size_ *= a.count;
  }
}

GridGeometry GridGeometry::uniform(int dimension, double lo, double hi, std::size_t count) {
  if (count < 2 || !(hi > lo)) fail(ErrorCode::InvalidArgument, "uniform grid needs hi > lo and count >= 2");
  Axis a{lo, (hi - lo) / static_cast<double>(count - 1), count};
  return GridGeometry(std::vector<Axis>(static_cast<std::size_t>(dimension), a));
}

std::size_t GridGeometry::stride(int d) const {
  std::size_t s = 1;
  for (int k = dimension() - 1; k > d; --k) s *= axes_[k].count;
  return s;
}

std::array<std::size_t, 3> GridGeometry::multi_index(std::size_t flat) const {
  std::array<std::size_t, 3> idx{};
  for (int d = dimension() - 1; d >= 0; --d) {
    idx[d] = flat % axes_[d].count;
    flat /= axes_[d].count;
  }
  return idx;
}

std::size_t GridGeometry::flat_index(const std::array<std::size_t, 3>& idx) const {
  std::size_t flat = 0;
  for (int d = 0; d < dimension(); ++d) flat = flat * axes_[d].count + idx[d];
  return flat;
}

std::array<double, 3> GridGeometry::point(std::size_t flat) const {
  const auto idx = multi_index(flat);
  std::array<double, 3> x{};
  for (int d = 0; d < dimension(); ++d) x[d] = axes_[d].coordinate(idx[d]);
  return x;
}

double GridGeometry::distance_to_boundary(std::span<const double> x) const {
  double dist = std::numeric_limits<double>::infinity();
  for (int d = 0; d < dimension(); ++d) {
    dist = std::min(dist, x[d] - axes_[d].origin);
    dist = std::min(dist, axes_[d].upper() - x[d]);
  }
  return dist;
}

bool GridGeometry::contains(std::span<const double> x, double slack) const {
  return distance_to_boundary(x) >= -slack;
}

bool GridGeometry::same_as(const GridGeometry& other, double tol) const {
  if (dimension() != other.dimension()) return false;
  for (int d = 0; d < dimension(); ++d) {
    const Axis& a = axes_[d];
    const Axis& b = other.axes_[d];
    if (a.count != b.count || std::abs(a.origin - b.origin) > tol || std::abs(a.spacing - b.spacing) > tol)
      return false;
  }
  return true;
}

const char* range_name(RangeTag r) { return r == RangeTag::Probability ? "probability" : "real"; }

const char* policy_name(BoundaryPolicy p) {
  return p == BoundaryPolicy::ConstantExtension ? "constant-extension" : "affine-tail";
}

RangeTag parse_range(const std::string& s) {
  if (s == "probability") return RangeTag::Probability;
  if (s == "real") return RangeTag::Real;
  fail(ErrorCode::Config, "unknown range tag '" + s + "'");
}

BoundaryPolicy parse_policy(const std::string& s) {
  if (s == "constant-extension" || s == "constant") return BoundaryPolicy::ConstantExtension;
  if (s == "affine-tail") return BoundaryPolicy::AffineTail;
  fail(ErrorCode::Config, "unknown boundary policy '" + s + "'");
}

double multilinear(const GridGeometry& g, const std::vector<double>& values, std::span<const double> x,
                   bool extrapolate) {
  const int n = g.dimension();
  std::array<std::size_t, 3> base{};
  std::array<double, 3> frac{};
  std::array<bool, 3> flat_axis{};
  for (int d = 0; d < n; ++d) {
    const Axis& a = g.axis(d);
    if (a.count == 1) {
      flat_axis[d] = true;
      base[d] = 0;
      frac[d] = 0.0;
      continue;
    }
    double u = (x[d] - a.origin) / a.spacing;
    if (!extrapolate) u = std::clamp(u, 0.0, static_cast<double>(a.count - 1));
    double cell = std::floor(u);
    cell = std::clamp(cell, 0.0, static_cast<double>(a.count - 2));
    base[d] = static_cast<std::size_t>(cell);
    frac[d] = u - cell;
  }
  double result = 0.0;
  const int corners = 1 << n;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    std::array<std::size_t, 3> idx{};
    bool skip = false;
    for (int d = 0; d < n; ++d) {
      const bool up = (c >> d) & 1;
      if (flat_axis[d]) {
        if (up) skip = true;
        idx[d] = 0;
        continue;
      }
      idx[d] = base[d] + (up ? 1 : 0);
      w *= up ? frac[d] : 1.0 - frac[d];
    }
    if (skip || w == 0.0) continue;
    result += w * values[g.flat_index(idx)];
  }
  return result;
}

GridFunction::GridFunction(GridGeometry geometry, std::vector<double> values, RangeTag range,
                           BoundaryPolicy policy)
    : geometry_(std::move(geometry)), values_(std::move(values)), range_(range), policy_(policy) {
  if (values_.size() != geometry_.size())
    fail(ErrorCode::InvalidArgument, "value count does not match grid size");
  for (double& v : values_) {
    if (!std::isfinite(v)) fail(ErrorCode::Domain, "grid values must be finite");
    if (range_ == RangeTag::Probability) {
      if (v < -1e-9 || v > 1.0 + 1e-9) fail(ErrorCode::Domain, "probability grid value outside [0,1]");
      v = std::clamp(v, kProbClamp, 1.0 - kProbClamp);
    }
  }
  if (policy_ == BoundaryPolicy::AffineTail && range_ == RangeTag::Probability) {
    transformed_.resize(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) transformed_[i] = phi_inv(values_[i]).value();
  }
}

GridFunction GridFunction::sample(const GridGeometry& geometry, const Evaluable& f, RangeTag range,
                                  BoundaryPolicy policy) {
  std::vector<double> values(geometry.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto p = geometry.point(i);
    values[i] = f(std::span<const double>(p.data(), geometry.dimension()));
    if (range == RangeTag::Probability) values[i] = std::clamp(values[i], 0.0, 1.0);
  }
  return GridFunction(geometry, std::move(values), range, policy);
}

double GridFunction::value_at(std::span<const double> x) const {
  if (policy_ == BoundaryPolicy::ConstantExtension) return multilinear(geometry_, values_, x, false);
  if (range_ == RangeTag::Real) return multilinear(geometry_, values_, x, true);
  return phi_cdf(multilinear(geometry_, transformed_, x, true));
}

double GridFunction::probit_at(std::span<const double> x) const {
  if (range_ == RangeTag::Probability && policy_ == BoundaryPolicy::AffineTail)
    return multilinear(geometry_, transformed_, x, true);
  return phi_inv(std::clamp(value_at(x), 0.0, 1.0)).value();
}

Evaluable GridFunction::as_evaluable() const {
  return [self = *this](std::span<const double> x) { return self.value_at(x); };
}

GridFunction GridFunction::with_policy(BoundaryPolicy policy) const {
  return GridFunction(geometry_, values_, range_, policy);
}

std::string format17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_grid_csv(const GridFunction& f, std::ostream& out) {
  const auto& g = f.geometry();
  for (int d = 0; d < g.dimension(); ++d) out << 'x' << (d + 1) << ',';
  out << "value\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto p = g.point(i);
    for (int d = 0; d < g.dimension(); ++d) out << format17(p[d]) << ',';
    out << format17(f.values()[i]) << '\n';
  }
}

std::string grid_csv(const GridFunction& f) {
  std::ostringstream os;
  write_grid_csv(f, os);
  return os.str();
}

GridFunction read_grid_csv(std::istream& in, RangeTag range, BoundaryPolicy policy) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::Io, "empty grid CSV");
  const int cols = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  const int n = cols - 1;
  if (n < 1 || n > 3) fail(ErrorCode::Io, "grid CSV must have 2 to 4 columns");
  std::vector<std::array<double, 4>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<double, 4> row{};
    std::stringstream ss(line);
    std::string cell;
    int c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= cols) fail(ErrorCode::Io, "too many cells in grid CSV row");
      try {
        row[c++] = std::stod(cell);
      } catch (const std::exception&) {
        fail(ErrorCode::Io, "unparsable grid CSV cell '" + cell + "'");
      }
    }
    if (c != cols) fail(ErrorCode::Io, "short grid CSV row");
    rows.push_back(row);
  }
  std::vector<Axis> axes(n);
  for (int d = 0; d < n; ++d) {
    std::vector<double> coords;
    for (const auto& r : rows) coords.push_back(r[d]);
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end(),
                             [](double a, double b) { return std::abs(a - b) <= 1e-12 * (1 + std::abs(a)); }),
                 coords.end());
    axes[d].origin = coords.front();
    axes[d].count = coords.size();
    axes[d].spacing = coords.size() > 1 ? (coords.back() - coords.front()) / (coords.size() - 1) : 1.0;
  }
  GridGeometry g(axes);
  if (g.size() != rows.size()) fail(ErrorCode::Io, "grid CSV rows do not form a full tensor grid");
  std::vector<double> values(g.size());
  for (const auto& r : rows) {
    std::array<std::size_t, 3> idx{};
    for (int d = 0; d < n; ++d)
      idx[d] = static_cast<std::size_t>(std::llround((r[d] - axes[d].origin) / axes[d].spacing));
    values[g.flat_index(idx)] = r[n];
  }
  return GridFunction(g, std::move(values), range, policy);
}

}  // namespace ehrhard
