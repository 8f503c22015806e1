#include "ehrhard/heat.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "ehrhard/errors.hpp"
#include "ehrhard/parallel.hpp"

namespace ehrhard {

namespace {

void check_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) fail(ErrorCode::Domain, "heat semigroup time must be finite and >= 0");
}

// Phi(b) - Phi(a) for a <= b, avoiding cancellation in the upper tail.
double mass_between(double a, double b) {
  if (a >= 0.0) return phi_sf(a) - phi_sf(b);
  return phi_cdf(b) - phi_cdf(a);
}

double quadrature_smooth(const Evaluable& f, int n, double t, std::span<const double> x,
                         const QuadratureRule& rule) {
  if (n < 1 || n > 3) fail(ErrorCode::InvalidArgument, "heat evolution supports dimensions 1..3");
  if (t == 0.0) return f(x);
  const double s = std::sqrt(t);
  std::array<double, 3> base{};
  std::copy(x.begin(), x.begin() + n, base.begin());
  std::array<double, 3> y{};
  return gamma_integral(
      [&](std::span<const double> z) {
        for (int d = 0; d < n; ++d) y[d] = base[d] + s * z[d];
        return f(std::span<const double>(y.data(), n));
      },
      n, rule);
}

double exact_grid_point(const GridFunction& f, double t, std::span<const double> x) {
  const GridGeometry& g = f.geometry();
  const int n = g.dimension();
  std::array<std::vector<double>, 3> w;
  for (int d = 0; d < n; ++d) w[d] = hat_kernel_weights(g.axis(d), t, x[d]);
  const auto& v = f.values();
  double sum = 0.0;
  if (n == 1) {
    for (std::size_t i = 0; i < v.size(); ++i) sum += w[0][i] * v[i];
    return sum;
  }
  for (std::size_t flat = 0; flat < v.size(); ++flat) {
    const auto idx = g.multi_index(flat);
    double weight = 1.0;
    for (int d = 0; d < n && weight != 0.0; ++d) weight *= w[d][idx[d]];
    if (weight != 0.0) sum += weight * v[flat];
  }
  return sum;
}

}  // namespace

std::vector<double> hat_kernel_weights(const Axis& axis, double t, double x) {
  check_time(t);
  const std::size_t n = axis.count;
  std::vector<double> w(n, 0.0);
  if (n == 1) {
    w[0] = 1.0;
    return w;
  }
  const double h = axis.spacing;
  if (t == 0.0) {
    double u = std::clamp((x - axis.origin) / h, 0.0, static_cast<double>(n - 1));
    std::size_t cell = std::min<std::size_t>(static_cast<std::size_t>(std::floor(u)), n - 2);
    const double frac = u - static_cast<double>(cell);
    w[cell] = 1.0 - frac;
    w[cell + 1] += frac;
    return w;
  }
  const double sigma = std::sqrt(t);
  std::vector<double> z(n), dens(n);
  for (std::size_t k = 0; k < n; ++k) {
    z[k] = (axis.coordinate(k) - x) / sigma;
    dens[k] = phi_pdf(z[k]);
  }
  w[0] += phi_cdf(z[0]);
  w[n - 1] += phi_sf(z[n - 1]);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double mass = mass_between(z[j], z[j + 1]);
    if (mass == 0.0 && dens[j] == 0.0 && dens[j + 1] == 0.0) continue;
    const double first = (x - axis.coordinate(j)) * mass + sigma * (dens[j] - dens[j + 1]);
    const double rise = first / h;
    w[j + 1] += rise;
    w[j] += mass - rise;
  }
  return w;
}

double heat_smooth_point(const Evaluable& f, int n, double t, std::span<const double> x,
                         const QuadratureRule& rule) {
  check_time(t);
  return quadrature_smooth(f, n, t, x, rule);
}

double heat_evolve_point(const Evaluable& f, int n, double t, std::span<const double> x,
                         const QuadratureRule& rule) {
  return std::clamp(heat_smooth_point(f, n, t, x, rule), 0.0, 1.0);
}

double heat_evolve_point(const GridFunction& f, double t, std::span<const double> x, const QuadratureRule& rule) {
  check_time(t);
  double v;
  if (t == 0.0) {
    v = f.value_at(x);
  } else if (f.policy() == BoundaryPolicy::ConstantExtension) {
    v = exact_grid_point(f, t, x);
  } else {
    v = quadrature_smooth([&f](std::span<const double> y) { return f.value_at(y); }, f.dimension(), t, x, rule);
  }
  return f.range() == RangeTag::Probability ? std::clamp(v, 0.0, 1.0) : v;
}

GridFunction heat_evolve_grid(const GridFunction& f, double t, const QuadratureRule& rule) {
  check_time(t);
  if (t == 0.0) return f;
  const GridGeometry& g = f.geometry();
  const int n = g.dimension();
  std::vector<double> out(g.size());
  if (f.policy() == BoundaryPolicy::ConstantExtension) {
    out = f.values();
    for (int d = 0; d < n; ++d) {
      const Axis& a = g.axis(d);
      std::vector<std::vector<double>> kernel(a.count);
      for (std::size_t i = 0; i < a.count; ++i) kernel[i] = hat_kernel_weights(a, t, a.coordinate(i));
      const std::size_t stride = g.stride(d);
      const std::size_t lines = g.size() / a.count;
      std::vector<double> next(g.size());
      parallel_for(lines, [&](std::size_t begin, std::size_t end) {
        std::vector<double> line(a.count);
        for (std::size_t l = begin; l < end; ++l) {
          const std::size_t outer = l / stride, inner = l % stride;
          const std::size_t start = outer * stride * a.count + inner;
          for (std::size_t k = 0; k < a.count; ++k) line[k] = out[start + k * stride];
          for (std::size_t i = 0; i < a.count; ++i) {
            double s = 0.0;
            const auto& row = kernel[i];
            for (std::size_t k = 0; k < a.count; ++k) s += row[k] * line[k];
            next[start + i * stride] = s;
          }
        }
      });
      out.swap(next);
    }
  } else {
    parallel_for(g.size(), [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const auto p = g.point(i);
        out[i] = heat_evolve_point(f, t, std::span<const double>(p.data(), n), rule);
      }
    });
  }
  if (f.range() == RangeTag::Probability)
    for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return GridFunction(g, std::move(out), f.range(), f.policy());
}

ProbitField probit_transform(const GridFunction& f) {
  if (f.range() != RangeTag::Probability) fail(ErrorCode::InvalidArgument, "probit transform needs a probability grid");
  ProbitField F{f.geometry(), std::vector<double>(f.size())};
  for (std::size_t i = 0; i < f.size(); ++i) F.values[i] = phi_inv(f.values()[i]).value();
  return F;
}

GridFunction probit_inverse(const ProbitField& F, BoundaryPolicy policy) {
  std::vector<double> v(F.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = phi_cdf(F.values[i]);
  return GridFunction(F.geometry, std::move(v), RangeTag::Probability, policy);
}

int stencil_steps(const GridGeometry& g, double h) {
  int steps = -1;
  for (int d = 0; d < g.dimension(); ++d) {
    const double r = h / g.axis(d).spacing;
    const long s = std::lround(r);
    if (s < 1 || std::abs(r - static_cast<double>(s)) > 1e-9 * r)
      fail(ErrorCode::Config, "stencil spacing must be a positive integer multiple of the grid spacing");
    if (steps >= 0 && s != steps) fail(ErrorCode::Config, "stencil spacing must match on every axis");
    steps = static_cast<int>(s);
    if (g.axis(d).count < static_cast<std::size_t>(2 * s + 1))
      fail(ErrorCode::Config, "grid too small for the stencil");
  }
  return steps;
}

std::vector<char> stencil_interior(const GridGeometry& g, int steps, double zone) {
  std::vector<char> mask(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto idx = g.multi_index(i);
    bool ok = true;
    for (int d = 0; d < g.dimension() && ok; ++d)
      ok = idx[d] >= static_cast<std::size_t>(steps) && idx[d] + steps < g.axis(d).count;
    if (!ok) continue;
    const auto p = g.point(i);
    if (g.distance_to_boundary(std::span<const double>(p.data(), g.dimension())) < zone - 1e-12) continue;
    mask[i] = 1;
  }
  return mask;
}

namespace {

struct Stencil {
  const GridGeometry* g;
  int steps;
  double h;

  double laplacian(const std::vector<double>& u, std::size_t i) const {
    double lap = 0.0;
    for (int d = 0; d < g->dimension(); ++d) {
      const std::size_t s = g->stride(d) * steps;
      lap += (u[i + s] - 2.0 * u[i] + u[i - s]) / (h * h);
    }
    return lap;
  }
  double grad_sq(const std::vector<double>& u, std::size_t i) const {
    double q = 0.0;
    for (int d = 0; d < g->dimension(); ++d) {
      const std::size_t s = g->stride(d) * steps;
      const double gd = (u[i + s] - u[i - s]) / (2.0 * h);
      q += gd * gd;
    }
    return q;
  }
};

ResidualField finish(const GridGeometry& g, std::vector<double> values) {
  ResidualField r{g, std::move(values), 0.0, 0};
  for (double v : r.values) {
    if (std::isnan(v)) continue;
    r.max_abs = std::max(r.max_abs, std::abs(v));
    ++r.interior_count;
  }
  return r;
}

}  // namespace

double stencil_laplacian(const GridGeometry& g, int steps, double h, const std::vector<double>& u, std::size_t i) {
  return Stencil{&g, steps, h}.laplacian(u, i);
}

double stencil_grad_sq(const GridGeometry& g, int steps, double h, const std::vector<double>& u, std::size_t i) {
  return Stencil{&g, steps, h}.grad_sq(u, i);
}

ResidualField make_residual_field(const GridGeometry& g, std::vector<double> values) {
  return finish(g, std::move(values));
}

ResidualField heat_pde_residual(const GridFunction& f, double t, double dt, double h, const QuadratureRule& rule,
                                double zone) {
  if (!(t > 0.0)) fail(ErrorCode::Domain, "residual time must be positive");
  if (!(dt > 0.0) || dt >= t) fail(ErrorCode::Config, "time step must satisfy 0 < dt < t");
  const GridGeometry& g = f.geometry();
  const int steps = stencil_steps(g, h);
  if (zone < 0.0) zone = 4.0 * std::sqrt(t + dt);
  const auto mask = stencil_interior(g, steps, zone);
  const auto um = heat_evolve_grid(f, t - dt, rule).values();
  const auto u0 = heat_evolve_grid(f, t, rule).values();
  const auto up = heat_evolve_grid(f, t + dt, rule).values();
  Stencil st{&g, steps, h};
  std::vector<double> res(g.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!mask[i]) continue;
    res[i] = (up[i] - um[i]) / (2.0 * dt) - 0.5 * st.laplacian(u0, i);
  }
  return finish(g, std::move(res));
}

ResidualField probit_pde_residual(const ProbitField& F_minus, const ProbitField& F_0, const ProbitField& F_plus,
                                  double dt, double h, double zone) {
  const GridGeometry& g = F_0.geometry;
  if (!g.same_as(F_minus.geometry) || !g.same_as(F_plus.geometry))
    fail(ErrorCode::InvalidArgument, "probit fields must share grid geometry");
  if (!(dt > 0.0)) fail(ErrorCode::Config, "time step must be positive");
  if (h <= 0.0) h = g.axis(0).spacing;
  const int steps = stencil_steps(g, h);
  const auto mask = stencil_interior(g, steps, zone);
  Stencil st{&g, steps, h};
  std::vector<double> res(g.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!mask[i]) continue;
    for (int d = -1; d < g.dimension(); ++d) {
      auto check = [&](std::size_t k) {
        if (!std::isfinite(F_minus.values[k]) || !std::isfinite(F_0.values[k]) || !std::isfinite(F_plus.values[k]))
          fail(ErrorCode::Domain, "non-finite probit value inside the residual zone");
      };
      if (d < 0) {
        check(i);
      } else {
        const std::size_t s = g.stride(d) * steps;
        check(i + s);
        check(i - s);
      }
    }
    const double Ft = (F_plus.values[i] - F_minus.values[i]) / (2.0 * dt);
    res[i] = Ft - 0.5 * (st.laplacian(F_0.values, i) - F_0.values[i] * st.grad_sq(F_0.values, i));
  }
  return finish(g, std::move(res));
}

TailReport tail_condition_check(const std::vector<GridFunction>& f_list, const GridFunction& h,
                                const std::vector<double>& a_list, const std::vector<double>& alpha) {
  if (f_list.size() != a_list.size() || f_list.size() != alpha.size())
    fail(ErrorCode::InvalidArgument, "f_list, a_list and alpha must have equal length");
  auto on_shell = [](const GridGeometry& g, std::size_t i) {
    const auto idx = g.multi_index(i);
    for (int d = 0; d < g.dimension(); ++d)
      if (idx[d] == 0 || idx[d] + 1 == g.axis(d).count) return true;
    return false;
  };
  TailReport r;
  r.all_satisfied = true;
  double weighted = 0.0;
  for (std::size_t k = 0; k < f_list.size(); ++k) {
    const auto& g = f_list[k].geometry();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (on_shell(g, i)) mx = std::max(mx, f_list[k].values()[i]);
    r.f_shell_max.push_back(mx);
    const bool ok = mx <= phi_cdf(a_list[k]);
    r.f_satisfied.push_back(ok);
    r.all_satisfied = r.all_satisfied && ok;
    weighted += alpha[k] * a_list[k];
  }
  const auto& g = h.geometry();
  double mn = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (on_shell(g, i)) mn = std::min(mn, h.values()[i]);
  r.h_shell_min = mn;
  r.h_threshold = phi_cdf(weighted);
  r.h_satisfied = mn >= r.h_threshold;
  r.all_satisfied = r.all_satisfied && r.h_satisfied;
  return r;
}

}  // namespace ehrhard
