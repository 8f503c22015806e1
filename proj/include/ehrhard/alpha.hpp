#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace ehrhard {

inline constexpr std::uint64_t kDefaultSeed = 0xE4A4D;

// Coefficients and the zero-based convex index set.
struct AlphaSpec {
  std::vector<double> alpha;
  std::vector<std::size_t> i_conv;

  AlphaSpec() = default;
  AlphaSpec(std::vector<double> a, std::vector<std::size_t> conv);

  std::size_t m() const { return alpha.size(); }
  bool is_convex(std::size_t i) const;
  double sum() const;
  void validate() const;
};

struct AlphaCheck {
  bool feasible = false;
  double sum = 0.0;
  std::vector<std::string> violations;
};

AlphaCheck check_alpha(const AlphaSpec& spec);

struct IntervalJ {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

// The first k coefficients are sphere-constrained, the rest ball-constrained.
IntervalJ phi_image_interval(const std::vector<double>& alpha, std::size_t k);
// Interval for a spec after moving sphere indices first.
IntervalJ phi_image_interval(const AlphaSpec& spec);

double phi_min_bruteforce(const std::vector<double>& alpha, std::size_t k, int d, int resolution = 720);

struct CertificateResiduals {
  double max_norm_violation = 0.0;
  double sum_norm_residual = 0.0;
  double min_lambda = 0.0;
  double max_lambda_off_conv = 0.0;
  double min_eigenvalue = 0.0;
  double symmetry = 0.0;
};

struct EllipticCertificate {
  std::vector<double> alpha;
  std::vector<std::size_t> i_conv;
  Eigen::MatrixXd vectors;  // column i is v_i
  Eigen::MatrixXd B;
  std::vector<double> lambda;
  double tol = 1e-9;
  CertificateResiduals residuals;
  int effective_rank = 0;
  std::string method;
};

CertificateResiduals certificate_residuals(const Eigen::MatrixXd& vectors, const AlphaSpec& spec);
bool residuals_within(const CertificateResiduals& r, double tol);

EllipticCertificate find_certificate(const AlphaSpec& spec, double tol = 1e-9, std::uint64_t seed = kDefaultSeed);

struct EllipticForm {
  Eigen::MatrixXd B;
  std::vector<double> lambda;
};

EllipticForm certificate_to_elliptic(const EllipticCertificate& cert, const AlphaSpec& spec);
// Certificate from caller-supplied vectors (columns); residuals are recorded, not enforced.
EllipticCertificate make_certificate(const Eigen::MatrixXd& vectors, const AlphaSpec& spec, double tol = 1e-9);

}  // namespace ehrhard
