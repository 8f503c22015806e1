#pragma once

#include <span>
#include <vector>

#include "ehrhard/gaussian.hpp"
#include "ehrhard/grid.hpp"

namespace ehrhard {

// P_t f(x) by tensor quadrature; result clamped to [0,1].
double heat_evolve_point(const Evaluable& f, int n, double t, std::span<const double> x,
                         const QuadratureRule& rule = default_rule());
// Same integral without range clamping, for real-valued f.
double heat_smooth_point(const Evaluable& f, int n, double t, std::span<const double> x,
                         const QuadratureRule& rule = default_rule());
// Constant-extension grids use the exact convolution of the multilinear interpolant;
// affine-tail grids use quadrature on the extended interpolant.
double heat_evolve_point(const GridFunction& f, double t, std::span<const double> x,
                         const QuadratureRule& rule = default_rule());
GridFunction heat_evolve_grid(const GridFunction& f, double t, const QuadratureRule& rule = default_rule());

// Weights w_k with sum_k f_k w_k = P_t of the constant-extension interpolant at x (1D axis).
std::vector<double> hat_kernel_weights(const Axis& axis, double t, double x);

ProbitField probit_transform(const GridFunction& f);
GridFunction probit_inverse(const ProbitField& F, BoundaryPolicy policy = BoundaryPolicy::ConstantExtension);

struct ResidualField {
  GridGeometry geometry;
  std::vector<double> values;  // NaN outside the evaluated zone
  double max_abs = 0.0;
  std::size_t interior_count = 0;
};

// Default zone: points at distance >= 4 sqrt(t + dt) from the boundary.
ResidualField heat_pde_residual(const GridFunction& f, double t, double dt, double h,
                                const QuadratureRule& rule = default_rule(), double zone = -1.0);
ResidualField probit_pde_residual(const ProbitField& F_minus, const ProbitField& F_0, const ProbitField& F_plus,
                                  double dt, double h = -1.0, double zone = 0.0);

// Shared stencil machinery: step count for spacing h along every axis, and interior mask.
int stencil_steps(const GridGeometry& g, double h);
std::vector<char> stencil_interior(const GridGeometry& g, int steps, double zone);
double stencil_laplacian(const GridGeometry& g, int steps, double h, const std::vector<double>& u, std::size_t i);
double stencil_grad_sq(const GridGeometry& g, int steps, double h, const std::vector<double>& u, std::size_t i);
// Wraps per-node residuals (NaN = not evaluated) with max and count.
ResidualField make_residual_field(const GridGeometry& g, std::vector<double> values);

struct TailReport {
  std::vector<bool> f_satisfied;
  std::vector<double> f_shell_max;
  bool h_satisfied = false;
  double h_shell_min = 0.0;
  double h_threshold = 0.0;
  bool all_satisfied = false;
};

TailReport tail_condition_check(const std::vector<GridFunction>& f_list, const GridFunction& h,
                                const std::vector<double>& a_list, const std::vector<double>& alpha);

}  // namespace ehrhard
