#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ehrhard/extended_real.hpp"

namespace ehrhard {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
inline constexpr double kPhiInvClamp = 1e-15;

double phi_pdf(double x);
double phi_cdf(double x);
double phi_cdf(ExtendedReal x);
// Upper tail 1 - Phi(x) without cancellation.
double phi_sf(double x);
ExtendedReal phi_inv(double p);

enum class RuleKind { GaussHermite, CompositeGaussian };

// Nodes and weights for integrals against the standard normal density.
struct QuadratureRule {
  RuleKind kind = RuleKind::GaussHermite;
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;

  static QuadratureRule gauss_hermite(int order = 64);
  // Gauss-Legendre panels on [-half_width, half_width], weights multiplied by the density.
  // Suited to integrands with jumps or narrow features.
  static QuadratureRule composite_gaussian(int panels, double half_width = 10.0);

  std::size_t size() const { return nodes.size(); }
  std::string describe() const;
};

const QuadratureRule& default_rule();

using Evaluable = std::function<double(std::span<const double>)>;

double gamma_integral(const Evaluable& f, int n, const QuadratureRule& rule);

}  // namespace ehrhard
