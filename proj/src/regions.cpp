#include "ehrhard/regions.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <random>

#include "ehrhard/errors.hpp"
#include "ehrhard/gaussian.hpp"
#include "ehrhard/parallel.hpp"

namespace ehrhard {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTruncation = 10.0;
constexpr double kBigBox = 1e6;

// Phi(b) - Phi(a) for a <= b without upper-tail cancellation.
double mass(double a, double b) {
  if (!(b > a)) return 0.0;
  if (a >= 0.0) return phi_sf(a) - phi_sf(b);
  return phi_cdf(b) - phi_cdf(a);
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

bool same_direction(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() <= 1e-12; }

std::vector<Interval> merge(std::vector<Interval> iv) {
  std::sort(iv.begin(), iv.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& i : iv) {
    if (i.hi < i.lo) continue;
    if (!out.empty() && i.lo <= out.back().hi) {
      out.back().hi = std::max(out.back().hi, i.hi);
    } else {
      out.push_back(i);
    }
  }
  return out;
}

using Polygon = std::vector<Eigen::Vector2d>;

Polygon clip(const Polygon& poly, const Eigen::Vector2d& u, double b) {
  Polygon out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& p = poly[i];
    const Eigen::Vector2d& q = poly[(i + 1) % n];
    const double fp = u.dot(p) - b, fq = u.dot(q) - b;
    if (fp <= 0.0) out.push_back(p);
    if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) out.push_back(p + (q - p) * (fp / (fp - fq)));
  }
  return out;
}

Polygon clean(const Polygon& poly) {
  Polygon out;
  for (const auto& v : poly)
    if (out.empty() || (v - out.back()).norm() > 1e-12) out.push_back(v);
  while (out.size() > 1 && (out.front() - out.back()).norm() <= 1e-12) out.pop_back();
  return out;
}

Polygon clip_polytope(const ConvexPolytope& p, double box) {
  Polygon poly = {{-box, -box}, {box, -box}, {box, box}, {-box, box}};
  for (const auto& c : p.constraints) {
    poly = clip(poly, Eigen::Vector2d(c.u(0), c.u(1)), c.b);
    if (poly.empty()) break;
  }
  return clean(poly);
}

double polygon_area(const Polygon& v) {
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& p = v[i];
    const auto& q = v[(i + 1) % v.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

ConvexPolytope box_polytope(const Box& b) {
  ConvexPolytope p;
  p.dim = static_cast<int>(b.lo.size());
  for (int d = 0; d < p.dim; ++d) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(p.dim);
    e(d) = 1.0;
    if (std::isfinite(b.hi(d))) p.constraints.push_back({e, b.hi(d)});
    if (std::isfinite(b.lo(d))) p.constraints.push_back({-e, -b.lo(d)});
  }
  return p;
}

// Bounded 2D convex polygon view of a region, if it has one.
std::optional<Polygon> as_bounded_polygon(const RegionSet& r) {
  if (region_dimension(r) != 2) return std::nullopt;
  ConvexPolytope p;
  if (const auto* poly = std::get_if<ConvexPolytope>(&r)) {
    p = *poly;
  } else if (const auto* bu = std::get_if<BoxUnion>(&r)) {
    if (bu->boxes.size() != 1) return std::nullopt;
    p = box_polytope(bu->boxes[0]);
  } else {
    return std::nullopt;
  }
  Polygon v = clip_polytope(p, kBigBox);
  for (const auto& q : v)
    if (std::abs(q.x()) >= kBigBox * (1 - 1e-12) || std::abs(q.y()) >= kBigBox * (1 - 1e-12)) return std::nullopt;
  if (v.empty()) return std::nullopt;
  return v;
}

}  // namespace

int region_dimension(const RegionSet& r) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, HalfSpace>) return static_cast<int>(s.u.size());
        if constexpr (std::is_same_v<T, Ball>) return static_cast<int>(s.center.size());
        if constexpr (std::is_same_v<T, ConvexPolytope>) return s.dim;
        if constexpr (std::is_same_v<T, BoxUnion>) return s.dim;
      },
      r);
}

std::string region_kind(const RegionSet& r) {
  static const char* names[] = {"half-space", "ball", "polytope", "box-union"};
  return names[r.index()];
}

bool region_is_convex(const RegionSet& r) {
  if (const auto* bu = std::get_if<BoxUnion>(&r)) {
    if (bu->boxes.size() <= 1) return true;
    if (bu->dim == 1) return to_intervals(r).size() <= 1;
    return false;
  }
  return true;
}

bool region_contains(const RegionSet& r, const Eigen::VectorXd& x, double tol) {
  return std::visit(
      [&](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, HalfSpace>) return s.u.dot(x) <= s.b + tol;
        if constexpr (std::is_same_v<T, Ball>) return (x - s.center).norm() <= s.radius + tol;
        if constexpr (std::is_same_v<T, ConvexPolytope>) {
          for (const auto& c : s.constraints)
            if (c.u.dot(x) > c.b + tol) return false;
          return true;
        }
        if constexpr (std::is_same_v<T, BoxUnion>) {
          for (const auto& b : s.boxes) {
            bool in = true;
            for (int d = 0; d < s.dim && in; ++d) in = x(d) >= b.lo(d) - tol && x(d) <= b.hi(d) + tol;
            if (in) return true;
          }
          return false;
        }
      },
      r);
}

void validate_region(const RegionSet& r) {
  const int dim = region_dimension(r);
  if (dim < 1) fail(ErrorCode::InvalidArgument, "region dimension must be positive");
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, HalfSpace>) {
          if (std::abs(s.u.norm() - 1.0) > 1e-12) fail(ErrorCode::InvalidArgument, "half-space normal must be a unit vector");
          if (!std::isfinite(s.b)) fail(ErrorCode::InvalidArgument, "half-space offset must be finite");
        }
        if constexpr (std::is_same_v<T, Ball>) {
          if (!(s.radius > 0.0) || !std::isfinite(s.radius)) fail(ErrorCode::InvalidArgument, "ball radius must be positive");
          if (!s.center.allFinite()) fail(ErrorCode::InvalidArgument, "ball center must be finite");
        }
        if constexpr (std::is_same_v<T, ConvexPolytope>) {
          for (const auto& c : s.constraints) {
            if (c.u.size() != s.dim) fail(ErrorCode::InvalidArgument, "polytope constraint dimension mismatch");
            if (std::abs(c.u.norm() - 1.0) > 1e-12) fail(ErrorCode::InvalidArgument, "polytope normals must be unit vectors");
          }
          if (s.dim == 1) {
            const auto iv = to_intervals(r);
            const bool thin = iv.empty() || iv[0].hi - iv[0].lo <= 1e-12;
            if (iv.empty() && !s.degenerate) fail(ErrorCode::InvalidArgument, "polytope constraints are infeasible");
            if (thin && !s.degenerate) fail(ErrorCode::InvalidArgument, "polytope has empty interior and is not flagged degenerate");
          } else if (s.dim == 2) {
            const Polygon v = clip_polytope(s, kBigBox);
            if (v.size() < 3 || polygon_area(v) <= 1e-12) {
              if (!s.degenerate) fail(ErrorCode::InvalidArgument, "polytope has empty interior and is not flagged degenerate");
            }
          }
        }
        if constexpr (std::is_same_v<T, BoxUnion>) {
          for (const auto& b : s.boxes) {
            if (b.lo.size() != s.dim || b.hi.size() != s.dim) fail(ErrorCode::InvalidArgument, "box dimension mismatch");
            for (int d = 0; d < s.dim; ++d)
              if (!(b.lo(d) <= b.hi(d))) fail(ErrorCode::InvalidArgument, "box bounds must satisfy lo <= hi");
          }
          for (std::size_t i = 0; i < s.boxes.size(); ++i)
            for (std::size_t j = i + 1; j < s.boxes.size(); ++j) {
              bool overlap = true;
              for (int d = 0; d < s.dim && overlap; ++d) {
                const double lo = std::max(s.boxes[i].lo(d), s.boxes[j].lo(d));
                const double hi = std::min(s.boxes[i].hi(d), s.boxes[j].hi(d));
                overlap = hi - lo > 1e-12;
              }
              if (overlap) fail(ErrorCode::InvalidArgument, "box-union boxes must be pairwise disjoint");
            }
        }
      },
      r);
}

std::vector<Interval> to_intervals(const RegionSet& r) {
  if (region_dimension(r) != 1) fail(ErrorCode::InvalidArgument, "interval view needs a 1D region");
  return std::visit(
      [](const auto& s) -> std::vector<Interval> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, HalfSpace>) {
          if (s.u(0) > 0) return {{-kInf, s.b / s.u(0)}};
          return {{s.b / s.u(0), kInf}};
        }
        if constexpr (std::is_same_v<T, Ball>) return {{s.center(0) - s.radius, s.center(0) + s.radius}};
        if constexpr (std::is_same_v<T, ConvexPolytope>) {
          Interval iv{-kInf, kInf};
          for (const auto& c : s.constraints) {
            if (c.u(0) > 0) iv.hi = std::min(iv.hi, c.b / c.u(0));
            else iv.lo = std::max(iv.lo, c.b / c.u(0));
          }
          if (iv.hi < iv.lo) return {};
          return {iv};
        }
        if constexpr (std::is_same_v<T, BoxUnion>) {
          std::vector<Interval> iv;
          for (const auto& b : s.boxes) iv.push_back({b.lo(0), b.hi(0)});
          return merge(iv);
        }
      },
      r);
}

BoxUnion from_intervals(const std::vector<Interval>& iv) {
  BoxUnion u;
  u.dim = 1;
  for (const auto& i : merge(iv)) {
    Box b;
    b.lo = Eigen::VectorXd::Constant(1, i.lo);
    b.hi = Eigen::VectorXd::Constant(1, i.hi);
    u.boxes.push_back(b);
  }
  return u;
}

RegionSet enlarge(const EpsilonEnlargement& e) {
  if (!(e.epsilon >= 0.0)) fail(ErrorCode::InvalidArgument, "epsilon must be nonnegative");
  if (const auto* h = std::get_if<HalfSpace>(&e.base)) return HalfSpace{h->u, h->b + e.epsilon};
  if (const auto* b = std::get_if<Ball>(&e.base)) return Ball{b->center, b->radius + e.epsilon};
  if (region_dimension(e.base) == 1) {
    auto iv = to_intervals(e.base);
    for (auto& i : iv) {
      i.lo -= e.epsilon;
      i.hi += e.epsilon;
    }
    return from_intervals(iv);
  }
  fail(ErrorCode::Unsupported, "exact enlargement only for half-spaces, balls and 1D sets");
}

std::vector<Eigen::Vector2d> polygon_vertices(const ConvexPolytope& p) {
  if (p.dim != 2) fail(ErrorCode::InvalidArgument, "polygon vertices need a 2D polytope");
  auto v = as_bounded_polygon(p);
  if (!v) fail(ErrorCode::Unsupported, "polytope is unbounded or empty");
  return *v;
}

ConvexPolytope polygon_from_vertices(const std::vector<Eigen::Vector2d>& v) {
  ConvexPolytope p;
  p.dim = 2;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d e = v[(i + 1) % n] - v[i];
    if (e.norm() <= 1e-14) continue;
    Eigen::VectorXd u(2);
    u << e.y(), -e.x();
    u.normalize();
    const double b = u.dot(Eigen::VectorXd(v[i]));
    bool dup = false;
    for (auto& c : p.constraints)
      if (same_direction(c.u, u)) {
        c.b = std::max(c.b, b);
        dup = true;
      }
    if (!dup) p.constraints.push_back({u, b});
  }
  return p;
}

RegionSet minkowski_combine(const std::vector<double>& alphas, const std::vector<RegionSet>& regions) {
  if (alphas.size() != regions.size() || regions.empty())
    fail(ErrorCode::InvalidArgument, "need one coefficient per region");
  for (double a : alphas)
    if (!(a > 0.0)) fail(ErrorCode::InvalidArgument, "Minkowski coefficients must be positive");
  const int dim = region_dimension(regions[0]);
  for (const auto& r : regions)
    if (region_dimension(r) != dim) fail(ErrorCode::InvalidArgument, "regions must share a dimension");

  const bool all_half = std::all_of(regions.begin(), regions.end(),
                                    [](const RegionSet& r) { return std::holds_alternative<HalfSpace>(r); });
  if (all_half) {
    const auto& u0 = std::get<HalfSpace>(regions[0]).u;
    bool parallel = true;
    double b = 0.0;
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const auto& h = std::get<HalfSpace>(regions[i]);
      parallel = parallel && same_direction(h.u, u0);
      b += alphas[i] * h.b;
    }
    if (parallel) return HalfSpace{u0, b};
    // Half-spaces with distinct normals sum to the whole space.
    ConvexPolytope whole;
    whole.dim = dim;
    return whole;
  }
  const bool all_ball = std::all_of(regions.begin(), regions.end(),
                                    [](const RegionSet& r) { return std::holds_alternative<Ball>(r); });
  if (all_ball) {
    Ball out{Eigen::VectorXd::Zero(dim), 0.0};
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const auto& b = std::get<Ball>(regions[i]);
      out.center += alphas[i] * b.center;
      out.radius += alphas[i] * b.radius;
    }
    return out;
  }
  if (dim == 1) {
    std::vector<Interval> acc;
    for (std::size_t i = 0; i < regions.size(); ++i) {
      auto iv = to_intervals(regions[i]);
      for (auto& x : iv) {
        x.lo *= alphas[i];
        x.hi *= alphas[i];
      }
      if (i == 0) {
        acc = iv;
        continue;
      }
      std::vector<Interval> next;
      for (const auto& a : acc)
        for (const auto& b : iv) next.push_back({a.lo + b.lo, a.hi + b.hi});
      acc = merge(next);
    }
    return from_intervals(acc);
  }
  if (dim == 2) {
    std::vector<Polygon> polys;
    for (const auto& r : regions) {
      auto p = as_bounded_polygon(r);
      if (!p) break;
      polys.push_back(*p);
    }
    if (polys.size() == regions.size()) {
      // Support-function sum on a uniform direction set plus every summand edge normal.
      std::vector<Eigen::Vector2d> dirs;
      for (int k = 0; k < 720; ++k) {
        const double th = 2.0 * M_PI * k / 720.0;
        dirs.emplace_back(std::cos(th), std::sin(th));
      }
      for (const auto& poly : polys)
        for (std::size_t i = 0; i < poly.size(); ++i) {
          const Eigen::Vector2d e = poly[(i + 1) % poly.size()] - poly[i];
          if (e.norm() > 1e-14) dirs.push_back(Eigen::Vector2d(e.y(), -e.x()).normalized());
        }
      ConvexPolytope sum;
      sum.dim = 2;
      for (const auto& d : dirs) {
        double h = 0.0;
        for (std::size_t i = 0; i < polys.size(); ++i) {
          double best = -kInf;
          for (const auto& v : polys[i]) best = std::max(best, d.dot(v));
          h += alphas[i] * best;
        }
        sum.constraints.push_back({Eigen::VectorXd(d), h});
      }
      return polygon_from_vertices(polygon_vertices(sum));
    }
  }
  fail(ErrorCode::Unsupported, "unsupported Minkowski combination of " + region_kind(regions[0]) + " regions in dimension " +
                                   std::to_string(dim));
}

MeasureMethod MeasureMethod::parse(const std::string& s) {
  MeasureMethod m;
  if (s == "auto") m.kind = MeasureMethodKind::Auto;
  else if (s == "closed-form") m.kind = MeasureMethodKind::ClosedForm;
  else if (s == "quadrature") m.kind = MeasureMethodKind::Quadrature;
  else if (s == "monte-carlo") m.kind = MeasureMethodKind::MonteCarlo;
  else fail(ErrorCode::Config, "unknown measure method '" + s + "'");
  return m;
}

ExtendedReal MeasureResult::probit() const {
  if (probability <= 0.5) return phi_inv(std::clamp(probability, 0.0, 1.0));
  return -phi_inv(std::clamp(complement, 0.0, 1.0));
}

namespace {

MeasureResult interval_measure(const std::vector<Interval>& iv) {
  MeasureResult r;
  r.method = "closed-form";
  r.probability = 0.0;
  double prev = -kInf;
  r.complement = 0.0;
  for (const auto& i : iv) {
    r.probability += mass(i.lo, i.hi);
    r.complement += mass(prev, i.lo);
    prev = i.hi;
  }
  r.complement += mass(prev, kInf);
  r.error_bound = 1e-15 * (1.0 + static_cast<double>(iv.size()));
  return r;
}

std::optional<MeasureResult> closed_form(const RegionSet& region) {
  const int dim = region_dimension(region);
  if (const auto* h = std::get_if<HalfSpace>(&region)) {
    MeasureResult r;
    r.method = "closed-form";
    r.probability = phi_cdf(h->b);
    r.complement = phi_sf(h->b);
    r.error_bound = 1e-16;
    return r;
  }
  if (dim == 1) return interval_measure(to_intervals(region));
  if (const auto* b = std::get_if<Ball>(&region)) {
    if (b->center.norm() > 1e-15) return std::nullopt;
    MeasureResult r;
    r.method = "closed-form";
    const double x = 0.5 * b->radius * b->radius;
    r.probability = boost::math::gamma_p(0.5 * dim, x);
    r.complement = boost::math::gamma_q(0.5 * dim, x);
    r.error_bound = 1e-15;
    return r;
  }
  if (const auto* bu = std::get_if<BoxUnion>(&region)) {
    MeasureResult r;
    r.method = "closed-form";
    for (const auto& box : bu->boxes) {
      double p = 1.0;
      for (int d = 0; d < bu->dim; ++d) p *= mass(box.lo(d), box.hi(d));
      r.probability += p;
    }
    r.complement = 1.0 - r.probability;
    r.error_bound = 1e-15 * (1.0 + static_cast<double>(bu->boxes.size()));
    return r;
  }
  if (const auto* p = std::get_if<ConvexPolytope>(&region)) {
    // Whole space, or slabs bounded by parallel constraints.
    if (p->constraints.empty()) {
      MeasureResult r;
      r.method = "closed-form";
      r.probability = 1.0;
      r.complement = 0.0;
      return r;
    }
    const Eigen::VectorXd& u0 = p->constraints[0].u;
    double hi = kInf, lo = -kInf;
    for (const auto& c : p->constraints) {
      if (same_direction(c.u, u0)) hi = std::min(hi, c.b);
      else if (same_direction(c.u, -u0)) lo = std::max(lo, -c.b);
      else return std::nullopt;
    }
    return interval_measure(hi >= lo ? std::vector<Interval>{{lo, hi}} : std::vector<Interval>{});
  }
  return std::nullopt;
}

std::optional<MeasureResult> quadrature(const RegionSet& region) {
  if (region_dimension(region) != 2) return std::nullopt;
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  MeasureResult r;
  r.method = "quadrature";
  double err_total = 0.0;
  if (const auto* b = std::get_if<Ball>(&region)) {
    const double c1 = b->center(0), c2 = b->center(1), rad = b->radius;
    auto f = [&](double th) {
      const double w = rad * std::cos(th);
      return phi_pdf(c1 + rad * std::sin(th)) * mass(c2 - w, c2 + w) * w;
    };
    double err = 0.0;
    r.probability = GK::integrate(f, -M_PI / 2, M_PI / 2, 15, 1e-14, &err);
    r.complement = 1.0 - r.probability;
    r.error_bound = err + 1e-15;
    return r;
  }
  ConvexPolytope p;
  if (const auto* poly = std::get_if<ConvexPolytope>(&region)) {
    p = *poly;
  } else if (const auto* bu = std::get_if<BoxUnion>(&region); bu && bu->boxes.size() == 1) {
    p = box_polytope(bu->boxes[0]);
  } else {
    return std::nullopt;
  }
  const Polygon v = clip_polytope(p, kTruncation);
  if (v.size() < 3) {
    r.probability = 0.0;
    r.complement = 1.0;
    return r;
  }
  std::vector<double> xs;
  for (const auto& q : v) xs.push_back(q.x());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end(), [](double a, double b) { return std::abs(a - b) < 1e-13; }), xs.end());
  auto chord = [&](double x) {
    double lo = -kTruncation, hi = kTruncation;
    for (const auto& c : p.constraints) {
      const double uy = c.u(1);
      if (std::abs(uy) < 1e-15) continue;
      const double y = (c.b - c.u(0) * x) / uy;
      if (uy > 0) hi = std::min(hi, y);
      else lo = std::max(lo, y);
    }
    return mass(lo, hi);
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    double err = 0.0;
    total += GK::integrate([&](double x) { return phi_pdf(x) * chord(x); }, xs[i], xs[i + 1], 15, 1e-14, &err);
    err_total += err;
  }
  r.probability = total;
  r.complement = 1.0 - total;
  r.error_bound = err_total + 1e-15;
  return r;
}

}  // namespace

MeasureResult monte_carlo_measure(int dim, const std::function<bool(const Eigen::VectorXd&)>& member,
                                  std::size_t samples, std::uint64_t seed) {
  if (samples == 0) fail(ErrorCode::InvalidArgument, "Monte Carlo needs at least one sample");
  constexpr std::size_t chunk = 1 << 14;
  const std::size_t chunks = (samples + chunk - 1) / chunk;
  std::vector<std::size_t> hits(chunks, 0);
  parallel_for(chunks, [&](std::size_t begin, std::size_t end) {
    Eigen::VectorXd x(dim);
    for (std::size_t c = begin; c < end; ++c) {
      std::mt19937_64 rng(splitmix(seed ^ splitmix(c)));
      std::normal_distribution<double> normal;
      const std::size_t n = std::min(chunk, samples - c * chunk);
      std::size_t h = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (int d = 0; d < dim; ++d) x(d) = normal(rng);
        if (member(x)) ++h;
      }
      hits[c] = h;
    }
  });
  std::size_t total = 0;
  for (auto h : hits) total += h;
  MeasureResult r;
  r.method = "monte-carlo";
  r.approximate = true;
  const double n = static_cast<double>(samples);
  r.probability = static_cast<double>(total) / n;
  r.complement = 1.0 - r.probability;
  r.error_bound = 2.5758 * std::sqrt(std::max(r.probability * r.complement, 1.0 / n) / n);
  return r;
}

MeasureResult gaussian_measure(const RegionSet& region, const MeasureMethod& method) {
  validate_region(region);
  const int dim = region_dimension(region);
  auto mc = [&] {
    return monte_carlo_measure(dim, [&](const Eigen::VectorXd& x) { return region_contains(region, x); },
                               method.samples, method.seed);
  };
  switch (method.kind) {
    case MeasureMethodKind::ClosedForm: {
      auto r = closed_form(region);
      if (!r) fail(ErrorCode::Unsupported, "no closed form for this " + region_kind(region));
      return *r;
    }
    case MeasureMethodKind::Quadrature: {
      if (dim > 3) fail(ErrorCode::Unsupported, "quadrature limited to dimension <= 3");
      if (dim == 1) {
        auto r = closed_form(region);
        r->method = "quadrature";
        return *r;
      }
      auto r = quadrature(region);
      if (!r) fail(ErrorCode::Unsupported, "no quadrature for this " + region_kind(region));
      return *r;
    }
    case MeasureMethodKind::MonteCarlo:
      return mc();
    case MeasureMethodKind::Auto:
      if (auto r = closed_form(region)) return *r;
      if (auto r = quadrature(region)) return *r;
      return mc();
  }
  return mc();
}

namespace {

std::vector<Eigen::VectorXd> candidate_points(const RegionSet& r, int per_axis) {
  const int dim = region_dimension(r);
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim, -kTruncation);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(dim, kTruncation);
  if (const auto* b = std::get_if<Ball>(&r)) {
    lo = (b->center.array() - b->radius).matrix();
    hi = (b->center.array() + b->radius).matrix();
  } else if (const auto* bu = std::get_if<BoxUnion>(&r)) {
    lo = Eigen::VectorXd::Constant(dim, kInf);
    hi = Eigen::VectorXd::Constant(dim, -kInf);
    for (const auto& box : bu->boxes) {
      lo = lo.cwiseMin(box.lo);
      hi = hi.cwiseMax(box.hi);
    }
    lo = lo.cwiseMax(Eigen::VectorXd::Constant(dim, -kTruncation));
    hi = hi.cwiseMin(Eigen::VectorXd::Constant(dim, kTruncation));
  }
  std::vector<Eigen::VectorXd> pts;
  std::size_t total = 1;
  for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(per_axis);
  Eigen::VectorXd x(dim);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    for (int d = 0; d < dim; ++d) {
      const std::size_t i = rem % per_axis;
      rem /= per_axis;
      x(d) = per_axis == 1 ? lo(d) : lo(d) + (hi(d) - lo(d)) * static_cast<double>(i) / (per_axis - 1);
    }
    if (region_contains(r, x, 1e-12)) pts.push_back(x);
  }
  return pts;
}

}  // namespace

bool minkowski_membership(const std::vector<double>& alphas, const std::vector<RegionSet>& regions,
                          const Eigen::VectorXd& x, int samples_per_axis) {
  const std::size_t m = regions.size();
  if (m == 0 || alphas.size() != m) fail(ErrorCode::InvalidArgument, "need one coefficient per region");
  const bool all_boxes = std::all_of(regions.begin(), regions.end(),
                                     [](const RegionSet& r) { return std::holds_alternative<BoxUnion>(r); });
  if (all_boxes) {
    // Sums of boxes are boxes, so enumerate box choices.
    std::vector<std::size_t> choice(m, 0);
    while (true) {
      bool in = true;
      for (int d = 0; d < x.size() && in; ++d) {
        double lo = 0.0, hi = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const auto& b = std::get<BoxUnion>(regions[i]).boxes[choice[i]];
          lo += alphas[i] * b.lo(d);
          hi += alphas[i] * b.hi(d);
        }
        in = x(d) >= lo - 1e-9 && x(d) <= hi + 1e-9;
      }
      if (in) return true;
      std::size_t i = 0;
      while (i < m && ++choice[i] == std::get<BoxUnion>(regions[i]).boxes.size()) choice[i++] = 0;
      if (i == m) return false;
    }
  }
  if (m == 1) return region_contains(regions[0], x / alphas[0], 1e-9);
  std::vector<std::vector<Eigen::VectorXd>> cands(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    cands[i] = candidate_points(regions[i], samples_per_axis);
    if (cands[i].empty()) return false;
  }
  std::vector<std::size_t> choice(m - 1, 0);
  while (true) {
    Eigen::VectorXd rest = x;
    for (std::size_t i = 0; i + 1 < m; ++i) rest -= alphas[i] * cands[i][choice[i]];
    if (region_contains(regions[m - 1], rest / alphas[m - 1], 1e-9)) return true;
    std::size_t i = 0;
    while (i + 1 < m && ++choice[i] == cands[i].size()) choice[i++] = 0;
    if (i + 1 == m) return false;
  }
}

DeficitResult ehrhard_deficit(const AlphaSpec& spec, const std::vector<RegionSet>& regions,
                              const MeasureMethod& method) {
  spec.validate();
  if (regions.size() != spec.m()) fail(ErrorCode::InvalidArgument, "need one region per coefficient");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    validate_region(regions[i]);
    if (spec.is_convex(i) && !region_is_convex(regions[i]))
      fail(ErrorCode::Precondition, "region " + std::to_string(i + 1) + " must be convex");
  }
  DeficitResult out;
  for (const auto& r : regions) out.parts.push_back(gaussian_measure(r, method));
  try {
    RegionSet sum = minkowski_combine(spec.alpha, regions);
    out.combined = gaussian_measure(sum, method);
    out.sum_set = sum;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Unsupported) throw;
    const int dim = region_dimension(regions[0]);
    out.combined = monte_carlo_measure(
        dim, [&](const Eigen::VectorXd& x) { return minkowski_membership(spec.alpha, regions, x); },
        method.samples, method.seed);
    out.combined.method = "monte-carlo-membership";
    out.approximate = true;
  }
  ExtendedReal weighted(0.0);
  auto probit_error = [](const MeasureResult& r) {
    const ExtendedReal F = r.probit();
    if (!F.is_finite()) return r.error_bound > 0.0 ? kInf : 0.0;
    return r.error_bound / phi_pdf(F.value());
  };
  out.error_budget = probit_error(out.combined);
  for (std::size_t i = 0; i < regions.size(); ++i) {
    weighted += scale(spec.alpha[i], out.parts[i].probit());
    out.error_budget += spec.alpha[i] * probit_error(out.parts[i]);
    out.approximate = out.approximate || out.parts[i].approximate;
  }
  out.approximate = out.approximate || out.combined.approximate;
  out.deficit = out.combined.probit() - weighted;
  return out;
}

}  // namespace ehrhard
