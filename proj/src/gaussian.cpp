#include "ehrhard/gaussian.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numeric>

#include "ehrhard/errors.hpp"

namespace ehrhard {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880168872421;
constexpr double kSqrt2Pi = 2.50662827463100050241576528481;

template <std::size_t N>
double horner(const std::array<double, N>& c, double r) {
  double acc = c[N - 1];
  for (std::size_t i = N - 1; i-- > 0;) acc = acc * r + c[i];
  return acc;
}

// Wichura AS241 (PPND16), valid for 0 < p < 1.
double ppnd16(double p) {
  static const std::array<double, 8> a = {3.3871328727963666080e0, 1.3314166789178437745e+2,
                                          1.9715909503065514427e+3, 1.3731693765509461125e+4,
                                          4.5921953931549871457e+4, 6.7265770927008700853e+4,
                                          3.3430575583588128105e+4, 2.5090809287301226727e+3};
  static const std::array<double, 8> b = {1.0, 4.2313330701600911252e+1, 6.8718700749205790830e+2,
                                          5.3941960214247511077e+3, 2.1213794301586595867e+4,
                                          3.9307895800092710610e+4, 2.8729085735721942674e+4,
                                          5.2264952788528545610e+3};
  static const std::array<double, 8> c = {1.42343711074968357734e0, 4.63033784615654529590e0,
                                          5.76949722146069140550e0, 3.64784832476320460504e0,
                                          1.27045825245236838258e0, 2.41780725177450611770e-1,
                                          2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static const std::array<double, 8> d = {1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
                                          6.89767334985100004550e-1, 1.48103976427480074590e-1,
                                          1.51986665636164571966e-2, 5.47593808499534494600e-4,
                                          1.05075007164441684324e-9};
  static const std::array<double, 8> e = {6.65790464350110377720e0, 5.46378491116411436990e0,
                                          1.78482653991729133580e0, 2.96560571828504891230e-1,
                                          2.65321895265761230930e-2, 1.24266094738807843860e-3,
                                          2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static const std::array<double, 8> f = {1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
                                          1.48753612908506148525e-2, 7.86869131145613259100e-4,
                                          1.84631831751005468180e-5, 1.42151175831644588870e-7,
                                          2.04426310338993978564e-15};
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * horner(a, r) / horner(b, r);
  }
  double r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = horner(c, r) / horner(d, r);
  } else {
    r -= 5.0;
    x = horner(e, r) / horner(f, r);
  }
  return q < 0 ? -x : x;
}

// Lower-half inversion with one Halley step; p <= 0.5.
double inv_lower(double p) {
  double x = ppnd16(p);
  const double err = phi_cdf(x) - p;
  const double u = err * kSqrt2Pi * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

}  // namespace

double phi_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double phi_cdf(double x) {
  if (std::isnan(x)) fail(ErrorCode::Domain, "phi_cdf of NaN");
  return 0.5 * std::erfc(-x / kSqrt2);
}

double phi_cdf(ExtendedReal x) { return phi_cdf(x.value()); }

double phi_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

ExtendedReal phi_inv(double p) {
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::Domain, "phi_inv argument outside [0,1]");
  if (p == 0.0) return ExtendedReal::neg_inf();
  if (p == 1.0) return ExtendedReal::pos_inf();
  p = std::clamp(p, kPhiInvClamp, 1.0 - kPhiInvClamp);
  if (p <= 0.5) return ExtendedReal(inv_lower(p));
  return ExtendedReal(-inv_lower(1.0 - p));
}

QuadratureRule QuadratureRule::gauss_hermite(int order) {
  if (order < 1 || order > 300) fail(ErrorCode::InvalidArgument, "Gauss-Hermite order must be in [1, 300]");
  QuadratureRule rule;
  rule.kind = RuleKind::GaussHermite;
  rule.order = order;
  const int n = order;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = solver.eigenvalues()(i);
    double sum_sq = 0.0;
    for (int iter = 0; iter < 4; ++iter) {
      double p_prev = 0.0, p = 1.0;
      sum_sq = 0.0;
      for (int k = 0; k < n; ++k) {
        sum_sq += p * p;
        const double next = (x * p - std::sqrt(static_cast<double>(k)) * p_prev) / std::sqrt(k + 1.0);
        p_prev = p;
        p = next;
      }
      const double deriv = std::sqrt(static_cast<double>(n)) * p_prev;
      if (deriv == 0.0) break;
      const double step = p / deriv;
      x -= step;
      if (std::abs(step) < 1e-16 * (1.0 + std::abs(x))) break;
    }
    double p_prev = 0.0, p = 1.0;
    sum_sq = 0.0;
    for (int k = 0; k < n; ++k) {
      sum_sq += p * p;
      const double next = (x * p - std::sqrt(static_cast<double>(k)) * p_prev) / std::sqrt(k + 1.0);
      p_prev = p;
      p = next;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / sum_sq;
  }
  // Symmetrize and normalize.
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (double& w : rule.weights) w /= total;
  return rule;
}

QuadratureRule QuadratureRule::composite_gaussian(int panels, double half_width) {
  if (panels < 1) fail(ErrorCode::InvalidArgument, "composite rule needs at least one panel");
  if (!(half_width > 0.0)) fail(ErrorCode::InvalidArgument, "composite rule half width must be positive");
  using Gauss = boost::math::quadrature::gauss<double, 8>;
  QuadratureRule rule;
  rule.kind = RuleKind::CompositeGaussian;
  rule.order = panels * 8;
  const double width = 2.0 * half_width / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = -half_width + (p + 0.5) * width;
    const double half = 0.5 * width;
    const auto& abscissa = Gauss::abscissa();
    const auto& weights = Gauss::weights();
    for (std::size_t i = 0; i < abscissa.size(); ++i) {
      const double a = abscissa[i];
      if (a == 0.0) {
        rule.nodes.push_back(mid);
        rule.weights.push_back(weights[i] * half * phi_pdf(mid));
        continue;
      }
      for (double s : {-1.0, 1.0}) {
        const double x = mid + s * half * a;
        rule.nodes.push_back(x);
        rule.weights.push_back(weights[i] * half * phi_pdf(x));
      }
    }
  }
  const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (double& w : rule.weights) w /= total;
  return rule;
}

std::string QuadratureRule::describe() const {
  if (kind == RuleKind::GaussHermite) return "gauss-hermite-" + std::to_string(order);
  return "composite-gaussian-" + std::to_string(order);
}

const QuadratureRule& default_rule() {
  static const QuadratureRule rule = QuadratureRule::gauss_hermite(64);
  return rule;
}

double gamma_integral(const Evaluable& f, int n, const QuadratureRule& rule) {
  if (n < 1 || n > 3) fail(ErrorCode::InvalidArgument, "gamma_integral supports dimensions 1..3");
  const std::size_t q = rule.size();
  std::array<double, 3> x{};
  std::array<std::size_t, 3> idx{};
  std::size_t total = 1;
  for (int d = 0; d < n; ++d) total *= q;
  double sum = 0.0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    double w = 1.0;
    for (int d = n - 1; d >= 0; --d) {
      idx[d] = rem % q;
      rem /= q;
      x[d] = rule.nodes[idx[d]];
      w *= rule.weights[idx[d]];
    }
    sum += w * f(std::span<const double>(x.data(), n));
  }
  return sum;
}

}  // namespace ehrhard
