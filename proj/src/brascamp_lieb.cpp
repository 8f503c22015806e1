#include "ehrhard/brascamp_lieb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "ehrhard/errors.hpp"
#include "ehrhard/parallel.hpp"

namespace ehrhard {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd to_vec(std::span<const double> x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

void check_shapes(const BLDatum& datum) {
  if (datum.N < 1) fail(ErrorCode::InvalidArgument, "ambient dimension must be positive");
  if (datum.entries.empty()) fail(ErrorCode::InvalidArgument, "datum needs at least one entry");
  for (const auto& e : datum.entries) {
    if (e.B.cols() != datum.N || e.B.rows() < 1)
      fail(ErrorCode::InvalidArgument, "each B_i must have N columns and at least one row");
    if (!(e.c > 0.0)) fail(ErrorCode::InvalidArgument, "weights c_i must be positive");
  }
}

void require_valid(const BLDatum& datum) {
  const auto v = validate_bl_datum(datum);
  if (!(v.row_residual <= 1e-10 && v.decomposition_residual <= 1e-10 && v.trace_residual <= 1e-10))
    fail(ErrorCode::Precondition, "datum is not a geometric decomposition of the identity");
}

void check_sources(const BLDatum& datum, const std::vector<SourcePtr>& f_list) {
  if (f_list.size() != datum.m()) fail(ErrorCode::InvalidArgument, "need one function per datum entry");
  for (std::size_t i = 0; i < f_list.size(); ++i) {
    if (!f_list[i]) fail(ErrorCode::InvalidArgument, "null function source");
    if (f_list[i]->dimension() != datum.entries[i].B.rows())
      fail(ErrorCode::InvalidArgument, "f_" + std::to_string(i + 1) + " dimension does not match B_i");
  }
}

double log_at(const HeatSource& s, double t, std::span<const double> x, const QuadratureRule& rule) {
  return t == 0.0 ? s.log_value(x) : s.log_evolve(t, x, rule);
}

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string point_text(const std::vector<double>& x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

}  // namespace

BLValidation validate_bl_datum(const BLDatum& datum) {
  check_shapes(datum);
  BLValidation v;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(datum.N, datum.N);
  double trace = 0.0;
  for (const auto& e : datum.entries) {
    const Eigen::MatrixXd rows = e.B * e.B.transpose() - Eigen::MatrixXd::Identity(e.B.rows(), e.B.rows());
    v.row_residual = std::max(v.row_residual, rows.cwiseAbs().maxCoeff());
    sum += e.c * e.B.transpose() * e.B;
    trace += e.c * static_cast<double>(e.B.rows());
  }
  v.decomposition_residual = (sum - Eigen::MatrixXd::Identity(datum.N, datum.N)).cwiseAbs().maxCoeff();
  v.trace_residual = std::abs(trace - datum.N);
  v.pass = v.row_residual <= 1e-12 && v.decomposition_residual <= 1e-12 && v.trace_residual <= 1e-12;
  return v;
}

double pythagoras_check(const BLDatum& datum, std::size_t trials, std::uint64_t seed) {
  check_shapes(datum);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  Eigen::VectorXd v(datum.N);
  for (std::size_t k = 0; k < trials; ++k) {
    for (int d = 0; d < datum.N; ++d) v(d) = normal(rng);
    double rhs = 0.0;
    for (const auto& e : datum.entries) rhs += e.c * (e.B * v).squaredNorm();
    worst = std::max(worst, std::abs(v.squaredNorm() - rhs));
  }
  return worst;
}

double contraction_check(const BLDatum& datum, std::size_t trials, std::uint64_t seed) {
  check_shapes(datum);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double worst = -kInf;
  for (std::size_t k = 0; k < trials; ++k) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(datum.N);
    double rhs = 0.0;
    for (const auto& e : datum.entries) {
      Eigen::VectorXd x(e.B.rows());
      for (Eigen::Index d = 0; d < x.size(); ++d) x(d) = normal(rng);
      acc += e.c * e.B.transpose() * x;
      rhs += e.c * x.squaredNorm();
    }
    worst = std::max(worst, acc.squaredNorm() - rhs);
  }
  return trials ? worst : 0.0;
}

BLDatum coordinate_datum(int N) {
  BLDatum d;
  d.N = N;
  for (int i = 0; i < N; ++i) d.entries.push_back({1.0, Eigen::MatrixXd::Identity(N, N).row(i)});
  return d;
}

BLDatum angle_frame_datum(const std::vector<double>& degrees, double c) {
  BLDatum d;
  d.N = 2;
  for (double deg : degrees) {
    const double r = deg * M_PI / 180.0;
    Eigen::MatrixXd B(1, 2);
    B << std::cos(r), std::sin(r);
    d.entries.push_back({c, B});
  }
  return d;
}

GaussianSource::GaussianSource(Eigen::MatrixXd A, Eigen::VectorXd b, double kappa)
    : A_(std::move(A)), b_(std::move(b)), kappa_(kappa) {
  if (A_.rows() != A_.cols() || A_.rows() != b_.size() || b_.size() < 1)
    fail(ErrorCode::InvalidArgument, "Gaussian source needs square A matching b");
  if ((A_ - A_.transpose()).cwiseAbs().maxCoeff() > 1e-12) fail(ErrorCode::InvalidArgument, "A must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A_, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12) fail(ErrorCode::InvalidArgument, "A must be positive semidefinite");
}

double GaussianSource::log_value(std::span<const double> x) const {
  const Eigen::VectorXd v = to_vec(x);
  return kappa_ + b_.dot(v) - 0.5 * v.dot(A_ * v);
}

double GaussianSource::log_evolve(double t, std::span<const double> x, const QuadratureRule&) const {
  if (!(t >= 0.0)) fail(ErrorCode::Domain, "t must be nonnegative");
  const Eigen::VectorXd v = to_vec(x);
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(A_.rows(), A_.cols()) + t * A_;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  const Eigen::VectorXd g = b_ - A_ * v;
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < M.rows(); ++i) logdet += std::log(ldlt.vectorD()(i));
  return kappa_ + b_.dot(v) - 0.5 * v.dot(A_ * v) + 0.5 * t * g.dot(ldlt.solve(g)) - 0.5 * logdet;
}

GridSource::GridSource(GridFunction f) : f_(std::move(f)) {
  for (double v : f_.values())
    if (!(v > 0.0)) fail(ErrorCode::Domain, "grid source values must be positive");
}

double GridSource::evolve(double t, std::span<const double> x, const QuadratureRule& rule) const {
  if (t == 0.0) return f_.value_at(x);
  return heat_evolve_point(f_, t, x, rule);
}

FunctionSource::FunctionSource(Evaluable f, int n, std::string label) : f_(std::move(f)), n_(n), label_(std::move(label)) {
  if (n < 1 || n > 3) fail(ErrorCode::Unsupported, "function sources support dimension 1..3");
}

double FunctionSource::evolve(double t, std::span<const double> x, const QuadratureRule& rule) const {
  if (t == 0.0) return f_(x);
  return heat_smooth_point(f_, n_, t, x, rule);
}

double truncation_bump(std::span<const double> x) {
  double out = 1.0;
  for (double v : x) {
    const double u = v / 8.0;
    if (std::abs(u) >= 1.0) return 0.0;
    out *= std::exp(1.0 - 1.0 / (1.0 - u * u));
  }
  return out;
}

SourcePtr product_pullback(const BLDatum& datum, const std::vector<SourcePtr>& f_list, bool closed_form) {
  check_shapes(datum);
  check_sources(datum, f_list);
  bool all_gaussian = true;
  for (const auto& f : f_list) all_gaussian = all_gaussian && dynamic_cast<const GaussianSource*>(f.get());
  if (closed_form && all_gaussian) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(datum.N, datum.N);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(datum.N);
    double kappa = 0.0;
    for (std::size_t i = 0; i < datum.m(); ++i) {
      const auto& g = static_cast<const GaussianSource&>(*f_list[i]);
      const auto& e = datum.entries[i];
      A += e.c * e.B.transpose() * g.A() * e.B;
      b += e.c * e.B.transpose() * g.b();
      kappa += e.c * g.kappa();
    }
    return std::make_shared<GaussianSource>(0.5 * (A + A.transpose()), b, kappa);
  }
  if (datum.N > 3) fail(ErrorCode::Unsupported, "numeric pullback needs N <= 3");
  auto f = [datum, f_list](std::span<const double> x) {
    const Eigen::VectorXd v = to_vec(x);
    double log_sum = 0.0;
    for (std::size_t i = 0; i < datum.m(); ++i) {
      const Eigen::VectorXd y = datum.entries[i].B * v;
      log_sum += datum.entries[i].c * f_list[i]->log_value(std::span<const double>(y.data(), y.size()));
    }
    return std::exp(log_sum);
  };
  return std::make_shared<FunctionSource>(f, datum.N, "pullback");
}

std::shared_ptr<const GaussianSource> gaussian_sup_convolution(const BLDatum& datum,
                                                                const std::vector<SourcePtr>& f_list) {
  check_shapes(datum);
  check_sources(datum, f_list);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(datum.N, datum.N);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(datum.N);
  std::vector<Eigen::LLT<Eigen::MatrixXd>> chol;
  for (std::size_t i = 0; i < datum.m(); ++i) {
    const auto* g = dynamic_cast<const GaussianSource*>(f_list[i].get());
    if (!g) fail(ErrorCode::InvalidArgument, "closed-form sup-convolution needs Gaussian sources");
    chol.emplace_back(g->A());
    if (chol.back().info() != Eigen::Success)
      fail(ErrorCode::InvalidArgument, "closed-form sup-convolution needs positive definite A_i");
    const auto& e = datum.entries[i];
    M += e.c * e.B.transpose() * chol.back().solve(e.B);
    beta += e.c * e.B.transpose() * chol.back().solve(g->b());
  }
  const Eigen::LDLT<Eigen::MatrixXd> Mf(M);
  const Eigen::VectorXd lambda = Mf.solve(beta);
  double kappa = 0.0;
  for (std::size_t i = 0; i < datum.m(); ++i) {
    const auto& g = static_cast<const GaussianSource&>(*f_list[i]);
    const auto& e = datum.entries[i];
    const Eigen::VectorXd xi = chol[i].solve(g.b() - e.B * lambda);
    kappa += e.c * (g.kappa() + g.b().dot(xi) - 0.5 * xi.dot(g.A() * xi));
  }
  Eigen::MatrixXd Ah = Mf.solve(Eigen::MatrixXd::Identity(datum.N, datum.N));
  return std::make_shared<GaussianSource>(0.5 * (Ah + Ah.transpose()), lambda, kappa);
}

GridFunction sup_convolution_grid(const BLDatum& datum, const std::vector<SourcePtr>& f_list,
                                  const GridGeometry& geometry, std::size_t candidates, std::uint64_t seed) {
  check_shapes(datum);
  check_sources(datum, f_list);
  if (geometry.dimension() != datum.N) fail(ErrorCode::InvalidArgument, "grid dimension must equal N");
  std::vector<Eigen::Index> offset{0};
  for (const auto& e : datum.entries) offset.push_back(offset.back() + e.B.rows());
  const Eigen::Index D = offset.back();
  Eigen::MatrixXd L(datum.N, D);
  for (std::size_t i = 0; i < datum.m(); ++i)
    L.middleCols(offset[i], datum.entries[i].B.rows()) = datum.entries[i].c * datum.entries[i].B.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(L, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > 1e-12 * sv(0)) ++rank;
  const Eigen::MatrixXd K = svd.matrixV().rightCols(D - rank);

  auto objective = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    double s = 0.0;
    for (std::size_t i = 0; i < datum.m(); ++i) {
      const auto& e = datum.entries[i];
      const Eigen::VectorXd xi = e.B * x + z.segment(offset[i], e.B.rows());
      const double lv = f_list[i]->log_value(std::span<const double>(xi.data(), xi.size()));
      if (!std::isfinite(lv)) return -kInf;
      s += e.c * lv;
    }
    return s;
  };
  std::vector<double> values(geometry.size());
  const Eigen::Index k = K.cols();
  parallel_for(geometry.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t node = begin; node < end; ++node) {
      const auto p = geometry.point(node);
      const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(p.data(), datum.N);
      Eigen::VectorXd best_w = Eigen::VectorXd::Zero(k);
      double best = objective(x, Eigen::VectorXd::Zero(D));
      if (k > 0) {
        std::mt19937_64 rng(splitmix(seed ^ splitmix(node)));
        std::normal_distribution<double> normal;
        const std::size_t global = candidates / 2;
        const double scales[] = {0.5, 1.0, 2.0, 4.0};
        Eigen::VectorXd w(k);
        for (std::size_t c = 0; c < global; ++c) {
          for (Eigen::Index j = 0; j < k; ++j) w(j) = scales[c % 4] * normal(rng);
          const double v = objective(x, K * w);
          if (v > best) {
            best = v;
            best_w = w;
          }
        }
        const std::size_t local = candidates - global;
        for (std::size_t c = 0; c < local; ++c) {
          const double s = std::pow(1e-3, static_cast<double>(c) / static_cast<double>(std::max<std::size_t>(1, local)));
          for (Eigen::Index j = 0; j < k; ++j) w(j) = best_w(j) + s * normal(rng);
          const double v = objective(x, K * w);
          if (v > best) {
            best = v;
            best_w = w;
          }
        }
      }
      values[node] = std::exp(best);
    }
  });
  for (double& v : values) v = std::max(v, std::numeric_limits<double>::min());
  return GridFunction(geometry, std::move(values), RangeTag::Real, BoundaryPolicy::ConstantExtension);
}

BLPreservationReport bl_preservation_check(const BLDatum& datum, const std::vector<SourcePtr>& f_list,
                                           const std::vector<double>& t_list, const BLOptions& options) {
  require_valid(datum);
  check_sources(datum, f_list);
  if (datum.N > 3) fail(ErrorCode::Unsupported, "preservation checks need N <= 3");
  const QuadratureRule& rule = options.rule ? *options.rule : default_rule();
  const SourcePtr h = options.h ? options.h : product_pullback(datum, f_list, false);
  if (h->dimension() != datum.N) fail(ErrorCode::InvalidArgument, "h must live on R^N");
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(-options.sample_half_width, options.sample_half_width);
  std::vector<Eigen::VectorXd> xs(options.samples, Eigen::VectorXd(datum.N));
  for (auto& x : xs)
    for (int d = 0; d < datum.N; ++d) x(d) = unif(rng);

  auto deficit_at = [&](double t, const Eigen::VectorXd& x) {
    double rhs = 0.0;
    for (std::size_t i = 0; i < datum.m(); ++i) {
      const Eigen::VectorXd y = datum.entries[i].B * x;
      rhs += datum.entries[i].c * log_at(*f_list[i], t, std::span<const double>(y.data(), y.size()), rule);
    }
    return log_at(*h, t, std::span<const double>(x.data(), x.size()), rule) - rhs;
  };
  auto sweep = [&](double t, BLTimeResult& out) {
    std::vector<double> d(xs.size());
    parallel_for(xs.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) d[k] = deficit_at(t, xs[k]);
    });
    out.t = t;
    out.extreme = -kInf;
    for (std::size_t k = 0; k < d.size(); ++k)
      if (d[k] > out.extreme) {
        out.extreme = d[k];
        out.witness.assign(xs[k].data(), xs[k].data() + datum.N);
      }
  };
  BLPreservationReport rep;
  rep.h_kind = h->kind();
  BLTimeResult premise;
  sweep(0.0, premise);
  rep.premise_margin = -premise.extreme;
  rep.extreme = -kInf;
  for (double t : t_list) {
    if (!(t >= 0.0)) fail(ErrorCode::Domain, "times must be nonnegative");
    BLTimeResult r;
    sweep(t, r);
    rep.extreme = std::max(rep.extreme, r.extreme);
    rep.per_t.push_back(r);
  }
  if (t_list.empty()) rep.extreme = 0.0;
  return rep;
}

BLPreservationReport rbl_preservation_check(const BLDatum& datum, const std::vector<SourcePtr>& f_list,
                                            const std::vector<double>& t_list, const BLOptions& options) {
  require_valid(datum);
  check_sources(datum, f_list);
  if (datum.N > 3) fail(ErrorCode::Unsupported, "preservation checks need N <= 3");
  const QuadratureRule& rule = options.rule ? *options.rule : default_rule();
  SourcePtr h = options.h;
  if (!h) {
    bool closed = true;
    for (const auto& f : f_list) {
      const auto* g = dynamic_cast<const GaussianSource*>(f.get());
      closed = closed && g && Eigen::LLT<Eigen::MatrixXd>(g->A()).info() == Eigen::Success;
    }
    if (closed) {
      h = gaussian_sup_convolution(datum, f_list);
    } else {
      const std::size_t count = datum.N == 1 ? 257 : (datum.N == 2 ? 65 : 17);
      h = std::make_shared<GridSource>(
          sup_convolution_grid(datum, f_list, GridGeometry::uniform(datum.N, -8.0, 8.0, count), 10000, options.seed));
    }
  }
  if (h->dimension() != datum.N) fail(ErrorCode::InvalidArgument, "h must live on R^N");
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(-options.sample_half_width, options.sample_half_width);
  std::vector<std::vector<Eigen::VectorXd>> tuples(options.samples);
  for (auto& tup : tuples)
    for (const auto& e : datum.entries) {
      Eigen::VectorXd x(e.B.rows());
      for (Eigen::Index d = 0; d < x.size(); ++d) x(d) = unif(rng);
      tup.push_back(x);
    }
  auto deficit_at = [&](double t, const std::vector<Eigen::VectorXd>& tup, std::vector<double>* point) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(datum.N);
    double rhs = 0.0;
    for (std::size_t i = 0; i < datum.m(); ++i) {
      s += datum.entries[i].c * datum.entries[i].B.transpose() * tup[i];
      rhs += datum.entries[i].c * log_at(*f_list[i], t, std::span<const double>(tup[i].data(), tup[i].size()), rule);
    }
    if (point) {
      point->clear();
      for (const auto& x : tup) point->insert(point->end(), x.data(), x.data() + x.size());
    }
    return log_at(*h, t, std::span<const double>(s.data(), s.size()), rule) - rhs;
  };
  auto sweep = [&](double t, BLTimeResult& out) {
    std::vector<double> d(tuples.size());
    parallel_for(tuples.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) d[k] = deficit_at(t, tuples[k], nullptr);
    });
    out.t = t;
    out.extreme = kInf;
    for (std::size_t k = 0; k < d.size(); ++k)
      if (d[k] < out.extreme) {
        out.extreme = d[k];
        deficit_at(t, tuples[k], &out.witness);
      }
  };
  BLPreservationReport rep;
  rep.h_kind = h->kind();
  BLTimeResult premise;
  sweep(0.0, premise);
  rep.premise_margin = premise.extreme;
  if (premise.extreme < -options.premise_tol) {
    std::ostringstream os;
    os << "premise fails at t = 0: deficit " << premise.extreme << " at " << point_text(premise.witness);
    fail(ErrorCode::Precondition, os.str());
  }
  rep.extreme = kInf;
  for (double t : t_list) {
    if (!(t >= 0.0)) fail(ErrorCode::Domain, "times must be nonnegative");
    BLTimeResult r;
    sweep(t, r);
    rep.extreme = std::min(rep.extreme, r.extreme);
    rep.per_t.push_back(r);
  }
  if (t_list.empty()) rep.extreme = 0.0;
  return rep;
}

AsymptoticReport semigroup_asymptotics(const BLDatum& datum, const std::vector<SourcePtr>& f_list,
                                       const HeatSource& h, double t, const QuadratureRule& rule) {
  check_shapes(datum);
  check_sources(datum, f_list);
  if (!(t > 0.0)) fail(ErrorCode::Domain, "t must be positive");
  AsymptoticReport r;
  r.t = t;
  const double log2pit = std::log(2.0 * M_PI * t);
  const std::vector<double> zeroN(datum.N, 0.0);
  const double log_lhs = 0.5 * datum.N * log2pit + h.log_evolve(t, zeroN, rule);
  double log_rhs = 0.0;
  for (std::size_t i = 0; i < datum.m(); ++i) {
    const int ni = f_list[i]->dimension();
    const std::vector<double> zero(ni, 0.0);
    log_rhs += datum.entries[i].c * (0.5 * ni * log2pit + f_list[i]->log_evolve(t, zero, rule));
  }
  r.lhs = std::exp(log_lhs);
  r.rhs = std::exp(log_rhs);
  r.log_gap = log_lhs - log_rhs;
  return r;
}

ResidualField log_pde_residual(const GridFunction& f, double t, double dt, double h, const QuadratureRule& rule,
                               double zone) {
  for (double v : f.values())
    if (!(v > 0.0)) fail(ErrorCode::Domain, "log residual needs strictly positive values");
  if (!(t > 0.0)) fail(ErrorCode::Domain, "residual time must be positive");
  if (!(dt > 0.0) || dt >= t) fail(ErrorCode::Config, "time step must satisfy 0 < dt < t");
  const GridGeometry& g = f.geometry();
  const int steps = stencil_steps(g, h);
  if (zone < 0.0) zone = 4.0 * std::sqrt(t + dt);
  const auto mask = stencil_interior(g, steps, zone);
  auto log_field = [&](double s) {
    std::vector<double> u = heat_evolve_grid(f, s, rule).values();
    for (double& v : u) v = v > 0.0 ? std::log(v) : std::numeric_limits<double>::quiet_NaN();
    return u;
  };
  const auto um = log_field(t - dt), u0 = log_field(t), up = log_field(t + dt);
  std::vector<double> res(g.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!mask[i]) continue;
    const double r = (up[i] - um[i]) / dt - stencil_laplacian(g, steps, h, u0, i) - stencil_grad_sq(g, steps, h, u0, i);
    if (std::isnan(r)) fail(ErrorCode::Domain, "evolved values lost positivity inside the residual zone");
    res[i] = r;
  }
  return make_residual_field(g, std::move(res));
}

void GBLDatum::validate() const {
  if (N < 1) fail(ErrorCode::InvalidArgument, "ambient dimension must be positive");
  if (entries.empty()) fail(ErrorCode::InvalidArgument, "datum needs at least one map");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!std::isfinite(e.d) || e.d == 0.0) fail(ErrorCode::InvalidArgument, "d_i must be nonzero and finite");
    if (e.L.cols() != N || e.L.rows() < 1) fail(ErrorCode::InvalidArgument, "each L_i must have N columns");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(e.L);
    lu.setThreshold(1e-12);
    if (lu.rank() != e.L.rows())
      fail(ErrorCode::InvalidArgument, "L_" + std::to_string(i) + " is not surjective");
  }
}

namespace {

Eigen::MatrixXd selector(const std::vector<Eigen::Index>& offset, std::size_t i, Eigen::Index total) {
  const Eigen::Index n = offset[i + 1] - offset[i];
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, total);
  S.middleCols(offset[i], n) = Eigen::MatrixXd::Identity(n, n);
  return S;
}

}  // namespace

GBLDatum reverse_bl_layout(const BLDatum& datum) {
  check_shapes(datum);
  std::vector<Eigen::Index> offset{0};
  for (const auto& e : datum.entries) offset.push_back(offset.back() + e.B.rows());
  GBLDatum g;
  g.N = static_cast<int>(offset.back());
  Eigen::MatrixXd L0(datum.N, g.N);
  for (std::size_t i = 0; i < datum.m(); ++i)
    L0.middleCols(offset[i], datum.entries[i].B.rows()) = datum.entries[i].c * datum.entries[i].B.transpose();
  g.entries.push_back({1.0, L0});
  for (std::size_t i = 0; i < datum.m(); ++i) g.entries.push_back({-datum.entries[i].c, selector(offset, i, g.N)});
  return g;
}

GBLDatum bl_layout(const BLDatum& datum) {
  check_shapes(datum);
  GBLDatum g;
  g.N = datum.N;
  g.entries.push_back({-1.0, Eigen::MatrixXd::Identity(datum.N, datum.N)});
  for (const auto& e : datum.entries) g.entries.push_back({e.c, e.B});
  return g;
}

GBLDatum ehrhard_layout(const AlphaSpec& spec, int n) {
  spec.validate();
  if (n < 1) fail(ErrorCode::InvalidArgument, "n must be positive");
  const Eigen::Index m = static_cast<Eigen::Index>(spec.m());
  GBLDatum g;
  g.N = static_cast<int>(m * n);
  Eigen::MatrixXd L0(n, g.N);
  for (Eigen::Index i = 0; i < m; ++i) L0.middleCols(i * n, n) = spec.alpha[i] * Eigen::MatrixXd::Identity(n, n);
  g.entries.push_back({1.0, L0});
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, g.N);
    L.middleCols(i * n, n) = Eigen::MatrixXd::Identity(n, n);
    g.entries.push_back({-spec.alpha[i], L});
  }
  return g;
}

namespace {

Eigen::MatrixXd kernel_basis(const GBLDatum& datum, std::vector<Eigen::Index>& offset) {
  offset = {0};
  for (const auto& e : datum.entries) offset.push_back(offset.back() + e.L.rows());
  const Eigen::Index D = offset.back();
  Eigen::MatrixXd Lmap(datum.N, D);
  for (std::size_t i = 0; i < datum.size(); ++i)
    Lmap.middleCols(offset[i], datum.entries[i].L.rows()) = datum.entries[i].d * datum.entries[i].L.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Lmap, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  const double top = sv.size() ? sv(0) : 0.0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > 1e-12 * std::max(top, 1.0)) ++rank;
  return svd.matrixV().rightCols(D - rank);
}

}  // namespace

KernelReport kernel_structure(const GBLDatum& datum, std::uint64_t seed) {
  datum.validate();
  KernelReport rep;
  std::vector<Eigen::Index> offset;
  rep.kernel = kernel_basis(datum, offset);
  for (std::size_t i = 0; i < datum.size(); ++i) rep.block_sizes.push_back(static_cast<int>(datum.entries[i].L.rows()));
  const Eigen::Index k = rep.kernel.cols();
  const Eigen::Index n0 = datum.entries[0].L.rows();
  if (k == 0) {
    rep.equal_norm = true;
    rep.X = Eigen::MatrixXd::Zero(n0, 0);
    for (std::size_t i = 1; i < datum.size(); ++i) rep.R.push_back(Eigen::MatrixXd::Zero(datum.entries[i].L.rows(), n0));
    return rep;
  }
  std::vector<Eigen::VectorXd> probes;
  for (Eigen::Index j = 0; j < k; ++j) probes.push_back(rep.kernel.col(j));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int r = 0; r < 64; ++r) {
    Eigen::VectorXd w(k);
    for (Eigen::Index j = 0; j < k; ++j) w(j) = normal(rng);
    probes.push_back(rep.kernel * w.normalized());
  }
  for (const auto& y : probes) {
    double lo = kInf, hi = 0.0;
    for (std::size_t i = 0; i < datum.size(); ++i) {
      const double nrm = y.segment(offset[i], offset[i + 1] - offset[i]).norm();
      lo = std::min(lo, nrm);
      hi = std::max(hi, nrm);
    }
    rep.norm_spread = std::max(rep.norm_spread, hi - lo);
  }
  rep.equal_norm = rep.norm_spread <= 1e-10;
  if (!rep.equal_norm) return rep;
  const double scale = std::sqrt(static_cast<double>(datum.size()));
  const Eigen::MatrixXd U0 = scale * rep.kernel.middleRows(offset[0], n0);
  rep.X = U0;
  Eigen::MatrixXd recon(offset.back(), k);
  recon.middleRows(0, n0) = U0 / scale;
  for (std::size_t i = 1; i < datum.size(); ++i) {
    const Eigen::Index ni = offset[i + 1] - offset[i];
    const Eigen::MatrixXd Ui = scale * rep.kernel.middleRows(offset[i], ni);
    const Eigen::MatrixXd R = Ui * U0.transpose();
    rep.R.push_back(R);
    const Eigen::MatrixXd onX = (R * U0).transpose() * (R * U0) - Eigen::MatrixXd::Identity(k, k);
    rep.isometry_residual = std::max(rep.isometry_residual, onX.cwiseAbs().maxCoeff());
    recon.middleRows(offset[i], ni) = R * U0 / scale;
  }
  rep.reconstruction_residual =
      (recon * recon.transpose() - rep.kernel * rep.kernel.transpose()).cwiseAbs().maxCoeff();
  return rep;
}

double second_order_residual(const GBLDatum& datum, const Eigen::MatrixXd& A) {
  double worst = 0.0;
  for (const auto& e : datum.entries) {
    const Eigen::MatrixXd r = e.L * A * e.L.transpose() - Eigen::MatrixXd::Identity(e.L.rows(), e.L.rows());
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

namespace {

// Symmetric matrices in coordinates where the Euclidean norm equals the Frobenius norm.
struct SymCoords {
  int N;
  Eigen::Index size() const { return N * (N + 1) / 2; }
  Eigen::VectorXd pack(const Eigen::MatrixXd& A) const {
    Eigen::VectorXd v(size());
    Eigen::Index k = 0;
    for (int r = 0; r < N; ++r)
      for (int s = r; s < N; ++s) v(k++) = r == s ? A(r, r) : M_SQRT2 * A(r, s);
    return v;
  }
  Eigen::MatrixXd unpack(const Eigen::VectorXd& v) const {
    Eigen::MatrixXd A(N, N);
    Eigen::Index k = 0;
    for (int r = 0; r < N; ++r)
      for (int s = r; s < N; ++s) {
        const double a = r == s ? v(k) : v(k) / M_SQRT2;
        A(r, s) = A(s, r) = a;
        ++k;
      }
    return A;
  }
};

Eigen::MatrixXd psd_clip(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (A + A.transpose()));
  const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

double min_eig(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

}  // namespace

SecondOrderResult second_order_feasible(const GBLDatum& datum, int max_iter, std::uint64_t seed) {
  datum.validate();
  if (datum.N > 12) fail(ErrorCode::Unsupported, "second-order search supports N <= 12");
  const SymCoords sc{datum.N};
  // Constraint rows: (L_i A L_i^T)_{pq} for p <= q.
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  for (const auto& e : datum.entries) {
    for (Eigen::Index p = 0; p < e.L.rows(); ++p)
      for (Eigen::Index q = p; q < e.L.rows(); ++q) {
        Eigen::MatrixXd G = 0.5 * (e.L.row(p).transpose() * e.L.row(q) + e.L.row(q).transpose() * e.L.row(p));
        // <G, A>_F expressed in packed coordinates.
        rows.push_back(sc.pack(G));
        rhs.push_back(p == q ? 1.0 : 0.0);
      }
  }
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), sc.size());
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    M.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    b(static_cast<Eigen::Index>(r)) = rhs[r];
  }
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(M);
  auto project_affine = [&](const Eigen::MatrixXd& A) {
    const Eigen::VectorXd v = sc.pack(A);
    return sc.unpack(v - cod.solve(M * v - b));
  };

  SecondOrderResult res;
  res.status = "infeasible-or-unknown";
  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(datum.N, datum.N);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(datum.N, datum.N), q = p;
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::MatrixXd y = project_affine(x + p);
    p = x + p - y;
    const Eigen::MatrixXd xn = psd_clip(y + q);
    q = y + q - xn;
    x = xn;
    res.iterations = it;
    const double ry = second_order_residual(datum, y), ey = min_eig(y);
    if (ry <= 1e-10 && ey >= -1e-12) {
      res.A = y;
      break;
    }
    if (second_order_residual(datum, x) <= 1e-10) {
      res.A = x;
      break;
    }
  }
  if (res.A.size() == 0) res.A = x;
  res.constraint_residual = second_order_residual(datum, res.A);
  res.min_eigenvalue = min_eig(res.A);
  res.found = res.constraint_residual <= 1e-8 && res.min_eigenvalue >= -1e-9;
  if (res.found) res.status = "feasible";

  // One seeded configuration with grad C = 0 and C <= 0.
  std::vector<Eigen::Index> offset;
  const Eigen::MatrixXd K = kernel_basis(datum, offset);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(offset.back());
  if (K.cols() > 0) {
    Eigen::VectorXd w(K.cols());
    for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = normal(rng);
    y = K * w;
  }
  std::vector<double> Z(datum.size());
  double dz = 0.0;
  for (std::size_t i = 0; i < datum.size(); ++i) {
    Z[i] = normal(rng);
    dz += datum.entries[i].d * Z[i];
  }
  Z[0] -= (dz + std::abs(normal(rng))) / datum.entries[0].d;
  std::vector<Eigen::VectorXd> Y;
  std::vector<Eigen::MatrixXd> H;
  for (std::size_t i = 0; i < datum.size(); ++i) {
    const auto& L = datum.entries[i].L;
    Y.push_back(y.segment(offset[i], L.rows()));
    H.push_back(L * res.A * L.transpose());
  }
  const SplitTerms st = split_terms(datum, Z, Y, H);
  res.sample_S = st.S;
  res.sample_P = st.P;
  return res;
}

SplitTerms split_terms(const GBLDatum& datum, const std::vector<double>& Z, const std::vector<Eigen::VectorXd>& Y,
                       const std::vector<Eigen::MatrixXd>& H) {
  if (Z.size() != datum.size() || Y.size() != datum.size() || H.size() != datum.size())
    fail(ErrorCode::InvalidArgument, "need one value, gradient and Hessian per map");
  SplitTerms s;
  for (std::size_t i = 0; i < datum.size(); ++i) {
    s.S += datum.entries[i].d * H[i].trace();
    s.P -= datum.entries[i].d * Y[i].squaredNorm() * Z[i];
  }
  return s;
}

}  // namespace ehrhard
