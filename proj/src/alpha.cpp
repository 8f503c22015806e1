#include "ehrhard/alpha.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "ehrhard/errors.hpp"

namespace ehrhard {

AlphaSpec::AlphaSpec(std::vector<double> a, std::vector<std::size_t> conv)
    : alpha(std::move(a)), i_conv(std::move(conv)) {
  std::sort(i_conv.begin(), i_conv.end());
  validate();
}

bool AlphaSpec::is_convex(std::size_t i) const { return std::binary_search(i_conv.begin(), i_conv.end(), i); }

double AlphaSpec::sum() const { return std::accumulate(alpha.begin(), alpha.end(), 0.0); }

void AlphaSpec::validate() const {
  if (alpha.empty()) fail(ErrorCode::InvalidArgument, "alpha must have at least one entry");
  for (double a : alpha)
    if (!(a > 0.0) || !std::isfinite(a)) fail(ErrorCode::InvalidArgument, "alpha entries must be positive and finite");
  for (std::size_t k = 0; k < i_conv.size(); ++k) {
    if (i_conv[k] >= alpha.size()) fail(ErrorCode::InvalidArgument, "convex index out of range");
    if (k > 0 && i_conv[k] <= i_conv[k - 1]) fail(ErrorCode::InvalidArgument, "convex indices must be distinct");
  }
}

AlphaCheck check_alpha(const AlphaSpec& spec) {
  spec.validate();
  AlphaCheck r;
  r.sum = spec.sum();
  if (r.sum < 1.0) {
    std::ostringstream os;
    os << "sum of alpha is " << r.sum << " < 1";
    r.violations.push_back(os.str());
  }
  for (std::size_t j = 0; j < spec.m(); ++j) {
    if (spec.is_convex(j)) continue;
    const double excess = spec.alpha[j] - (r.sum - spec.alpha[j]);
    if (excess > 1.0) {
      std::ostringstream os;
      os << "index " << (j + 1) << ": alpha_j minus the other coefficients is " << excess << " > 1";
      r.violations.push_back(os.str());
    }
  }
  r.feasible = r.violations.empty();
  return r;
}

IntervalJ phi_image_interval(const std::vector<double>& alpha, std::size_t k) {
  if (k > alpha.size()) fail(ErrorCode::InvalidArgument, "k exceeds the number of coefficients");
  IntervalJ J;
  const double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  J.hi = total;
  J.lo = 0.0;
  for (std::size_t j = 0; j < k; ++j) J.lo = std::max(J.lo, alpha[j] - (total - alpha[j]));
  return J;
}

IntervalJ phi_image_interval(const AlphaSpec& spec) {
  std::vector<double> ordered;
  for (std::size_t i = 0; i < spec.m(); ++i)
    if (!spec.is_convex(i)) ordered.push_back(spec.alpha[i]);
  const std::size_t k = ordered.size();
  for (std::size_t i : spec.i_conv) ordered.push_back(spec.alpha[i]);
  return phi_image_interval(ordered, k);
}

namespace {

struct NormItem {
  double a;
  bool sphere;
};

// Reachable norms of partial sums, bucketed at width delta; a vector's contribution only
// depends on its angle to the current partial sum. Returns the smallest final norm.
double min_norm_dp(const std::vector<NormItem>& items, const std::vector<double>& cosines, int resolution) {
  constexpr double delta = 1e-3;
  constexpr int radii = 20;
  auto lengths = [&](const NormItem& it, int count) {
    std::vector<double> out;
    if (it.sphere) {
      out.push_back(it.a);
    } else {
      for (int q = 0; q <= count; ++q) out.push_back(it.a * q / count);
    }
    return out;
  };
  if (items.size() == 1) {
    const auto ls = lengths(items[0], resolution);
    return *std::min_element(ls.begin(), ls.end());
  }
  double total = 0.0;
  for (const auto& it : items) total += it.a;
  const std::size_t buckets = static_cast<std::size_t>(total / delta) + 4;
  std::vector<double> rep(buckets, -1.0);
  std::vector<std::size_t> occupied;
  auto insert = [&](double r) {
    const std::size_t b = static_cast<std::size_t>(r / delta);
    if (rep[b] < 0.0) {
      rep[b] = r;
      occupied.push_back(b);
    }
  };
  for (double s : lengths(items[0], radii)) insert(s);
  std::vector<double> states;
  for (std::size_t step = 1; step < items.size(); ++step) {
    states.clear();
    for (std::size_t b : occupied) states.push_back(rep[b]);
    for (std::size_t b : occupied) rep[b] = -1.0;
    occupied.clear();
    if (step + 1 == items.size()) {
      // The antipodal angle is on the grid, so the last vector only needs its length scanned.
      double best = std::numeric_limits<double>::infinity();
      for (double r : states)
        for (double s : lengths(items[step], resolution)) best = std::min(best, std::abs(r - s));
      return best;
    }
    const auto ls = lengths(items[step], radii);
    for (double r : states)
      for (double s : ls)
        for (double c : cosines) insert(std::sqrt(std::max(0.0, r * r + s * s + 2.0 * r * s * c)));
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace

double phi_min_bruteforce(const std::vector<double>& alpha, std::size_t k, int d, int resolution) {
  if (d != 2 && d != 3) fail(ErrorCode::InvalidArgument, "brute force supports d = 2 or d = 3");
  if (resolution < 360) fail(ErrorCode::InvalidArgument, "resolution must be at least 360 angles");
  if (alpha.empty() || k > alpha.size()) fail(ErrorCode::InvalidArgument, "invalid alpha or k");
  if (alpha.size() > 4) fail(ErrorCode::Resource, "brute force limited to m <= 4");
  for (double a : alpha)
    if (!(a > 0.0)) fail(ErrorCode::InvalidArgument, "alpha entries must be positive");

  // Relative angles on a uniform grid of `resolution` points over the circle; by reflection
  // only [0, pi] is needed. In d = 3 the polar angle plays the same role.
  const int half = resolution / 2;
  std::vector<double> cosines(half + 1);
  for (int j = 0; j <= half; ++j) cosines[j] = std::cos(M_PI * j / half);

  std::vector<NormItem> base;
  for (std::size_t i = 0; i < k; ++i) base.push_back({alpha[i], true});
  for (std::size_t i = k; i < alpha.size(); ++i) base.push_back({alpha[i], false});
  // Every choice of final vector; each value found is attained by a grid configuration.
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t last = 0; last < base.size(); ++last) {
    std::vector<NormItem> items;
    for (std::size_t i = 0; i < base.size(); ++i)
      if (i != last) items.push_back(base[i]);
    items.push_back(base[last]);
    best = std::min(best, min_norm_dp(items, cosines, resolution));
  }
  return best;
}

CertificateResiduals certificate_residuals(const Eigen::MatrixXd& vectors, const AlphaSpec& spec) {
  const std::size_t m = spec.m();
  CertificateResiduals r;
  Eigen::VectorXd a(m);
  for (std::size_t i = 0; i < m; ++i) a(i) = spec.alpha[i];
  const Eigen::MatrixXd B = vectors.transpose() * vectors;
  r.symmetry = (B - B.transpose()).cwiseAbs().maxCoeff();
  const Eigen::VectorXd sum = vectors * a;
  r.sum_norm_residual = std::abs(sum.norm() - 1.0);
  r.min_lambda = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    const double norm = vectors.col(i).norm();
    const double lambda = spec.alpha[i] * (1.0 - B(i, i));
    if (spec.is_convex(i)) {
      r.max_norm_violation = std::max(r.max_norm_violation, norm - 1.0);
      r.min_lambda = std::min(r.min_lambda, lambda);
    } else {
      r.max_norm_violation = std::max(r.max_norm_violation, std::abs(norm - 1.0));
      r.max_lambda_off_conv = std::max(r.max_lambda_off_conv, std::abs(lambda));
    }
  }
  if (!std::isfinite(r.min_lambda)) r.min_lambda = 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (B + B.transpose()), Eigen::EigenvaluesOnly);
  r.min_eigenvalue = eig.eigenvalues().minCoeff();
  return r;
}

bool residuals_within(const CertificateResiduals& r, double tol) {
  return r.max_norm_violation <= tol && r.sum_norm_residual <= tol && r.min_lambda >= -tol &&
         r.max_lambda_off_conv <= tol && r.min_eigenvalue >= -tol && r.symmetry <= tol;
}

namespace {

int effective_rank(const Eigen::MatrixXd& V) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(V);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-9) ++rank;
  return rank;
}

// Planar configuration: angle and radius per slot (internal order).
struct Planar {
  std::vector<double> theta;
  std::vector<double> radius;
};

double planar_norm(const std::vector<double>& a, const Planar& target, double s) {
  double x = 0.0, y = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = 1.0 + s * (target.radius[i] - 1.0);
    x += a[i] * r * std::cos(s * target.theta[i]);
    y += a[i] * r * std::sin(s * target.theta[i]);
  }
  return std::hypot(x, y);
}

Planar minimizing_configuration(const std::vector<double>& a, const std::vector<bool>& sphere) {
  const std::size_t m = a.size();
  const double total = std::accumulate(a.begin(), a.end(), 0.0);
  Planar p{std::vector<double>(m, 0.0), std::vector<double>(m, 1.0)};
  std::size_t dominant = m;
  double best = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double excess = a[j] - (total - a[j]);
    if (sphere[j] && excess > best) {
      best = excess;
      dominant = j;
    }
  }
  if (dominant < m) {
    for (std::size_t i = 0; i < m; ++i) p.theta[i] = i == dominant ? 0.0 : M_PI;
    return p;
  }
  std::vector<double> len = a;
  for (std::size_t j = 0; j < m; ++j) {
    if (!sphere[j] && a[j] > total - a[j]) {
      len[j] = total - a[j];
      p.radius[j] = len[j] / a[j];
    }
  }
  const double L = std::accumulate(len.begin(), len.end(), 0.0);
  if (L <= 0.0) return p;
  // Three groups, each at most half the total length, close into a triangle.
  std::vector<int> group(m, 2);
  double ga = 0.0, gb = 0.0;
  std::size_t i = 0;
  for (; i < m && ga + len[i] <= 0.5 * L * (1.0 + 1e-15); ++i) {
    group[i] = 0;
    ga += len[i];
  }
  if (i < m) {
    group[i] = 1;
    gb = len[i];
  }
  const double gc = L - ga - gb;
  double phi_b = M_PI;
  if (ga > 0.0 && gb > 0.0) {
    const double cos_gamma = std::clamp((ga * ga + gb * gb - gc * gc) / (2.0 * ga * gb), -1.0, 1.0);
    phi_b = M_PI - std::acos(cos_gamma);
  }
  const double cx = -(ga + gb * std::cos(phi_b));
  const double cy = -(gb * std::sin(phi_b));
  const double phi_c = (cx == 0.0 && cy == 0.0) ? M_PI : std::atan2(cy, cx);
  for (std::size_t j = 0; j < m; ++j) p.theta[j] = group[j] == 0 ? 0.0 : (group[j] == 1 ? phi_b : phi_c);
  return p;
}

Eigen::MatrixXd homotopy_vectors(const AlphaSpec& spec, const std::vector<std::size_t>& order) {
  const std::size_t m = spec.m();
  std::vector<double> a(m);
  std::vector<bool> sphere(m);
  for (std::size_t p = 0; p < m; ++p) {
    a[p] = spec.alpha[order[p]];
    sphere[p] = !spec.is_convex(order[p]);
  }
  const Planar target = minimizing_configuration(a, sphere);
  double lo = 0.0, hi = 1.0;
  if (planar_norm(a, target, 1.0) > 1.0) hi = 0.0;  // should not happen for feasible specs
  for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (planar_norm(a, target, mid) >= 1.0)
      lo = mid;
    else
      hi = mid;
  }
  const double s = std::abs(planar_norm(a, target, lo) - 1.0) <= std::abs(planar_norm(a, target, hi) - 1.0) ? lo : hi;
  const Eigen::Index rows = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(m));
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(rows, m);
  for (std::size_t p = 0; p < m; ++p) {
    const double r = 1.0 + s * (target.radius[p] - 1.0);
    const std::size_t col = order[p];
    V(0, col) = r * std::cos(s * target.theta[p]);
    if (rows > 1) V(1, col) = r * std::sin(s * target.theta[p]);
  }
  return V;
}

Eigen::MatrixXd projected_gradient(const AlphaSpec& spec, double tol, std::uint64_t seed, bool& ok) {
  const std::size_t m = spec.m();
  const Eigen::Index dim = static_cast<Eigen::Index>(std::max<std::size_t>(m, 1));
  Eigen::VectorXd a(m);
  for (std::size_t i = 0; i < m; ++i) a(i) = spec.alpha[i];
  auto project = [&](Eigen::MatrixXd& V) {
    for (std::size_t i = 0; i < m; ++i) {
      const double n = V.col(i).norm();
      if (!spec.is_convex(i)) {
        if (n > 0.0) V.col(i) /= n;
        else V(0, i) = 1.0;
      } else if (n > 1.0) {
        V.col(i) /= n;
      }
    }
  };
  auto energy = [&](const Eigen::MatrixXd& V) {
    const double q = (V * a).squaredNorm() - 1.0;
    return q * q;
  };
  ok = false;
  for (int restart = 0; restart < 32; ++restart) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(restart));
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::MatrixXd V(dim, m);
    for (Eigen::Index r = 0; r < dim; ++r)
      for (std::size_t c = 0; c < m; ++c) V(r, c) = normal(rng);
    for (std::size_t i = 0; i < m; ++i) {
      V.col(i).normalize();
      if (spec.is_convex(i)) V.col(i) *= unif(rng);
    }
    project(V);
    double step = 0.1;
    for (int it = 0; it < 5000; ++it) {
      const Eigen::VectorXd S = V * a;
      const double q = S.squaredNorm() - 1.0;
      if (std::abs(std::sqrt(std::max(0.0, q + 1.0)) - 1.0) <= 0.1 * tol) break;
      Eigen::MatrixXd G = 4.0 * q * S * a.transpose();
      const double e0 = q * q;
      for (int ls = 0; ls < 40; ++ls) {
        Eigen::MatrixXd W = V - step * G;
        project(W);
        if (energy(W) < e0) {
          V = W;
          step *= 1.5;
          break;
        }
        step *= 0.5;
      }
    }
    if (residuals_within(certificate_residuals(V, spec), tol)) {
      ok = true;
      return V;
    }
  }
  return Eigen::MatrixXd();
}

}  // namespace

EllipticCertificate make_certificate(const Eigen::MatrixXd& vectors, const AlphaSpec& spec, double tol) {
  spec.validate();
  if (vectors.cols() != static_cast<Eigen::Index>(spec.m()))
    fail(ErrorCode::InvalidArgument, "certificate needs one vector per coefficient");
  EllipticCertificate c;
  c.alpha = spec.alpha;
  c.i_conv = spec.i_conv;
  c.vectors = vectors;
  c.tol = tol;
  c.B = vectors.transpose() * vectors;
  for (std::size_t i = 0; i < spec.m(); ++i) c.lambda.push_back(spec.alpha[i] * (1.0 - c.B(i, i)));
  c.residuals = certificate_residuals(vectors, spec);
  c.effective_rank = effective_rank(vectors);
  c.method = "supplied";
  return c;
}

EllipticCertificate find_certificate(const AlphaSpec& spec, double tol, std::uint64_t seed) {
  const AlphaCheck chk = check_alpha(spec);
  if (!chk.feasible) {
    std::string msg = "coefficient condition fails, 1 is outside the interval:";
    for (const auto& v : chk.violations) msg += " " + v + ";";
    fail(ErrorCode::Infeasible, msg);
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < spec.m(); ++i)
    if (!spec.is_convex(i)) order.push_back(i);
  for (std::size_t i : spec.i_conv) order.push_back(i);

  Eigen::MatrixXd V = homotopy_vectors(spec, order);
  EllipticCertificate cert = make_certificate(V, spec, tol);
  cert.method = "homotopy";
  if (!residuals_within(cert.residuals, tol)) {
    bool ok = false;
    Eigen::MatrixXd W = projected_gradient(spec, tol, seed, ok);
    if (!ok) fail(ErrorCode::Internal, "certificate search did not converge");
    cert = make_certificate(W, spec, tol);
    cert.method = "projected-gradient";
  }
  return cert;
}

EllipticForm certificate_to_elliptic(const EllipticCertificate& cert, const AlphaSpec& spec) {
  spec.validate();
  if (cert.vectors.cols() != static_cast<Eigen::Index>(spec.m()))
    fail(ErrorCode::InvalidArgument, "certificate size does not match the coefficients");
  EllipticForm form;
  form.B = cert.vectors.transpose() * cert.vectors;
  const double tol = cert.tol;
  for (std::size_t i = 0; i < spec.m(); ++i) {
    const double lambda = spec.alpha[i] * (1.0 - form.B(i, i));
    if (spec.is_convex(i) && lambda < -tol)
      fail(ErrorCode::CertificateInvalid, "negative slack at convex index " + std::to_string(i + 1));
    if (!spec.is_convex(i) && std::abs(lambda) > tol)
      fail(ErrorCode::CertificateInvalid, "nonzero slack at sphere index " + std::to_string(i + 1));
    form.lambda.push_back(lambda);
  }
  Eigen::VectorXd a(spec.m());
  for (std::size_t i = 0; i < spec.m(); ++i) a(i) = spec.alpha[i];
  const double q = a.dot(form.B * a);
  if (std::abs(q - 1.0) > tol) fail(ErrorCode::CertificateInvalid, "<alpha, B alpha> differs from 1");
  return form;
}

}  // namespace ehrhard
