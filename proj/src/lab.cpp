#include "ehrhard/lab.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ehrhard/errors.hpp"
#include "ehrhard/parallel.hpp"

namespace ehrhard {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Point = std::array<double, 3>;

std::span<const double> view(const Point& p, int n) { return std::span<const double>(p.data(), n); }

bool is_clamped(double v) { return v <= kProbClamp * (1 + 1e-9) || v >= 1.0 - kProbClamp * (1 + 1e-6); }

}  // namespace

bool AxisBox::contains(std::span<const double> x) const {
  if (empty()) return true;
  for (std::size_t d = 0; d < lo.size(); ++d)
    if (x[d] < lo[d] - 1e-12 || x[d] > hi[d] + 1e-12) return false;
  return true;
}

AxisBox AxisBox::cube(int dim, double half_width) {
  return AxisBox{std::vector<double>(dim, -half_width), std::vector<double>(dim, half_width)};
}

double max_probit_second_difference(const GridFunction& f) {
  if (f.range() != RangeTag::Probability) fail(ErrorCode::InvalidArgument, "probit test needs a probability grid");
  const GridGeometry& g = f.geometry();
  const int n = g.dimension();
  std::vector<double> T(f.size());
  std::vector<char> clamped(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    T[i] = phi_inv(f.values()[i]).value();
    clamped[i] = is_clamped(f.values()[i]);
  }
  // Stencil directions as index offsets: axes, and for n >= 2 the face diagonals.
  std::vector<std::array<int, 3>> dirs;
  for (int d = 0; d < n; ++d) {
    std::array<int, 3> e{};
    e[d] = 1;
    dirs.push_back(e);
  }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      std::array<int, 3> e{};
      e[a] = 1;
      e[b] = 1;
      dirs.push_back(e);
      e[b] = -1;
      dirs.push_back(e);
    }
  double worst = -kInf;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (clamped[i]) continue;
    const auto idx = g.multi_index(i);
    for (const auto& e : dirs) {
      std::array<std::size_t, 3> up = idx, dn = idx;
      bool ok = true;
      for (int d = 0; d < n && ok; ++d) {
        const long u = static_cast<long>(idx[d]) + e[d], v = static_cast<long>(idx[d]) - e[d];
        ok = u >= 0 && v >= 0 && u < static_cast<long>(g.axis(d).count) && v < static_cast<long>(g.axis(d).count);
        up[d] = static_cast<std::size_t>(u);
        dn[d] = static_cast<std::size_t>(v);
      }
      if (!ok) continue;
      const std::size_t iu = g.flat_index(up), id = g.flat_index(dn);
      if (clamped[iu] || clamped[id]) continue;
      worst = std::max(worst, T[iu] - 2.0 * T[i] + T[id]);
    }
  }
  return worst;
}

void HypothesisInstance::validate() const {
  spec.validate();
  if (f_list.size() != spec.m()) fail(ErrorCode::InvalidArgument, "need one f per coefficient");
  const int n = h.dimension();
  if (h.range() != RangeTag::Probability) fail(ErrorCode::InvalidArgument, "h must be probability-valued");
  for (std::size_t i = 0; i < f_list.size(); ++i) {
    if (f_list[i].range() != RangeTag::Probability)
      fail(ErrorCode::InvalidArgument, "f_" + std::to_string(i + 1) + " must be probability-valued");
    if (f_list[i].dimension() != n) fail(ErrorCode::InvalidArgument, "all grids must share a dimension");
    if (spec.is_convex(i) && max_probit_second_difference(f_list[i]) > 1e-8)
      fail(ErrorCode::InvalidArgument, "f_" + std::to_string(i + 1) + " must have a concave probit field");
  }
  if (!plan.slot_boxes.empty() && plan.slot_boxes.size() != spec.m())
    fail(ErrorCode::InvalidArgument, "sampling plan needs one box per slot");
}

void write_deficit_csv(const DeficitField& field, std::ostream& out) {
  out << 't';
  for (std::size_t i = 0; i < field.slots * static_cast<std::size_t>(field.dimension); ++i) out << ",x" << (i + 1);
  out << ",C\n";
  for (const auto& r : field.records) {
    out << format17(r.t);
    for (double v : r.x) out << ',' << format17(v);
    out << ',' << (r.outside ? std::string("nan") : format17(r.C)) << '\n';
  }
}

std::string deficit_csv(const DeficitField& field) {
  std::ostringstream os;
  write_deficit_csv(field, os);
  return os.str();
}

namespace {

struct TupleSet {
  bool tensor = true;
  std::vector<std::vector<Point>> slot_points;  // tensor mode
  std::vector<std::vector<Point>> lhs;          // lhs mode: per tuple, m points
  std::size_t stride = 0;

  std::size_t count() const {
    if (!tensor) return lhs.size();
    std::size_t c = 1;
    for (const auto& s : slot_points) c *= s.size();
    return c;
  }
};

std::vector<Point> slot_nodes(const GridFunction& f, const AxisBox& box, double zone, std::size_t stride) {
  const GridGeometry& g = f.geometry();
  std::vector<Point> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto idx = g.multi_index(i);
    bool keep = true;
    for (int d = 0; d < g.dimension() && keep; ++d) keep = idx[d] % stride == 0;
    if (!keep) continue;
    const Point p = g.point(i);
    if (g.distance_to_boundary(view(p, g.dimension())) < zone - 1e-12) continue;
    if (!box.contains(view(p, g.dimension()))) continue;
    out.push_back(p);
  }
  return out;
}

TupleSet make_tuples(const HypothesisInstance& inst, double zone) {
  const std::size_t m = inst.spec.m();
  const int n = inst.h.dimension();
  const SamplingPlan& plan = inst.plan;
  auto box_of = [&](std::size_t i) { return plan.slot_boxes.empty() ? AxisBox{} : plan.slot_boxes[i]; };
  bool tensor = plan.mode == SamplingMode::Tensor ||
                (plan.mode == SamplingMode::Auto && static_cast<std::size_t>(n) * m <= 4);
  TupleSet ts;
  ts.tensor = tensor;
  if (tensor) {
    std::size_t stride = std::max<std::size_t>(1, plan.stride);
    while (true) {
      ts.slot_points.clear();
      for (std::size_t i = 0; i < m; ++i) ts.slot_points.push_back(slot_nodes(inst.f_list[i], box_of(i), zone, stride));
      double count = 1.0;
      for (const auto& s : ts.slot_points) count *= static_cast<double>(s.size());
      if (count <= static_cast<double>(plan.max_tuples) || stride > 1u << 20) break;
      stride *= 2;
    }
    ts.stride = stride;
    return ts;
  }
  std::mt19937_64 rng(plan.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t N = plan.lhs_samples;
  ts.lhs.assign(N, std::vector<Point>(m, Point{}));
  for (std::size_t i = 0; i < m; ++i) {
    const GridGeometry& g = inst.f_list[i].geometry();
    const AxisBox box = box_of(i);
    for (int d = 0; d < n; ++d) {
      double lo = g.axis(d).origin + zone, hi = g.axis(d).upper() - zone;
      if (!box.empty()) {
        lo = std::max(lo, box.lo[d]);
        hi = std::min(hi, box.hi[d]);
      }
      if (!(hi >= lo)) fail(ErrorCode::Config, "sampling window is empty after the interior zone");
      std::vector<std::size_t> perm(N);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      for (std::size_t k = 0; k < N; ++k)
        ts.lhs[k][i][d] = lo + (hi - lo) * (static_cast<double>(perm[k]) + unif(rng)) / static_cast<double>(N);
    }
  }
  return ts;
}

struct Evaluation {
  double min_C = kInf;
  std::size_t argmin_tuple = 0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

// Evaluates C over all tuples with the given probit accessors.
template <typename SlotProbit, typename TargetProbit>
Evaluation evaluate(const HypothesisInstance& inst, const TupleSet& ts, double zone, SlotProbit slot_probit,
                    TargetProbit target_probit, double t, DeficitField* field, std::size_t max_records) {
  const std::size_t m = inst.spec.m();
  const int n = inst.h.dimension();
  const std::size_t total = ts.count();
  // Tensor mode: cache per-slot probit values.
  std::vector<std::vector<double>> cache;
  if (ts.tensor) {
    cache.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      cache[i].resize(ts.slot_points[i].size());
      for (std::size_t k = 0; k < cache[i].size(); ++k) cache[i][k] = slot_probit(i, ts.slot_points[i][k]);
    }
  }
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(worker_count(), total / 1024 + 1));
  std::vector<Evaluation> partial(workers);
  const std::size_t chunk = (total + workers - 1) / workers;
  std::vector<DeficitRecord> records;
  const bool want = field != nullptr;
  std::mutex record_mutex;
  parallel_for(workers, [&](std::size_t wb, std::size_t we) {
    for (std::size_t w = wb; w < we; ++w) {
      Evaluation& ev = partial[w];
      const std::size_t begin = w * chunk, end = std::min(total, begin + chunk);
      std::vector<Point> xs(m);
      std::vector<double> Fs(m);
      for (std::size_t tuple = begin; tuple < end; ++tuple) {
        if (ts.tensor) {
          std::size_t rem = tuple;
          for (std::size_t i = m; i-- > 0;) {
            const std::size_t k = rem % ts.slot_points[i].size();
            rem /= ts.slot_points[i].size();
            xs[i] = ts.slot_points[i][k];
            Fs[i] = cache[i][k];
          }
        } else {
          for (std::size_t i = 0; i < m; ++i) {
            xs[i] = ts.lhs[tuple][i];
            Fs[i] = slot_probit(i, xs[i]);
          }
        }
        Point s{};
        for (std::size_t i = 0; i < m; ++i)
          for (int d = 0; d < n; ++d) s[d] += inst.spec.alpha[i] * xs[i][d];
        const bool outside = inst.h.geometry().distance_to_boundary(view(s, n)) < zone - 1e-12 ||
                             !inst.plan.target_box.contains(view(s, n));
        double C = 0.0;
        if (outside) {
          ++ev.skipped;
        } else {
          ExtendedReal rhs(0.0);
          for (std::size_t i = 0; i < m; ++i) rhs += scale(inst.spec.alpha[i], ExtendedReal(Fs[i]));
          C = (ExtendedReal(target_probit(s)) - rhs).value();
          ++ev.evaluated;
          if (C < ev.min_C) {
            ev.min_C = C;
            ev.argmin_tuple = tuple;
          }
        }
        if (want && tuple < max_records) {
          DeficitRecord r;
          r.t = t;
          for (std::size_t i = 0; i < m; ++i)
            for (int d = 0; d < n; ++d) r.x.push_back(xs[i][d]);
          r.C = C;
          r.outside = outside;
          std::lock_guard<std::mutex> lock(record_mutex);
          records.push_back(std::move(r));
        }
      }
    }
  });
  Evaluation out;
  for (const auto& ev : partial) {
    out.evaluated += ev.evaluated;
    out.skipped += ev.skipped;
    if (ev.min_C < out.min_C) {
      out.min_C = ev.min_C;
      out.argmin_tuple = ev.argmin_tuple;
    }
  }
  if (want) {
    // Workers finish in arbitrary order; restore tuple order through the coordinates' position.
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return records[a].x < records[b].x; });
    for (std::size_t k : order) field->records.push_back(records[k]);
  }
  return out;
}

std::vector<double> tuple_coordinates(const HypothesisInstance& inst, const TupleSet& ts, std::size_t tuple) {
  const std::size_t m = inst.spec.m();
  const int n = inst.h.dimension();
  std::vector<Point> xs(m);
  if (ts.tensor) {
    std::size_t rem = tuple;
    for (std::size_t i = m; i-- > 0;) {
      xs[i] = ts.slot_points[i][rem % ts.slot_points[i].size()];
      rem /= ts.slot_points[i].size();
    }
  } else {
    xs = ts.lhs[tuple];
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < m; ++i)
    for (int d = 0; d < n; ++d) out.push_back(xs[i][d]);
  return out;
}

}  // namespace

MarginReport hypothesis_margin(const HypothesisInstance& inst) {
  inst.validate();
  const TupleSet ts = make_tuples(inst, 0.0);
  const int n = inst.h.dimension();
  auto slot = [&](std::size_t i, const Point& x) { return inst.f_list[i].probit_at(view(x, n)); };
  auto target = [&](const Point& s) { return inst.h.probit_at(view(s, n)); };
  const Evaluation ev = evaluate(inst, ts, 0.0, slot, target, 0.0, nullptr, 0);
  MarginReport r;
  r.min_margin = ev.evaluated ? ev.min_C : 0.0;
  r.evaluated = ev.evaluated;
  r.skipped = ev.skipped;
  if (ev.evaluated) r.argmin = tuple_coordinates(inst, ts, ev.argmin_tuple);
  r.stride_used = ts.stride;
  r.mode = ts.tensor ? "tensor" : "latin-hypercube";
  return r;
}

double deficit_at_origin(const HypothesisInstance& inst, double t, const QuadratureRule& rule) {
  const int n = inst.h.dimension();
  const std::vector<double> zero(n, 0.0);
  auto probit_of = [&](const GridFunction& g) {
    if (t == 0.0) return ExtendedReal(g.probit_at(zero));
    return phi_inv(heat_evolve_point(g, t, zero, rule));
  };
  ExtendedReal rhs(0.0);
  for (std::size_t i = 0; i < inst.spec.m(); ++i) rhs += scale(inst.spec.alpha[i], probit_of(inst.f_list[i]));
  return (probit_of(inst.h) - rhs).value();
}

PreservationReport preservation_check(const HypothesisInstance& inst, const std::vector<double>& t_list,
                                      const PreservationOptions& options) {
  inst.validate();
  const QuadratureRule& rule = options.rule ? *options.rule : default_rule();
  double t_max = 0.0;
  for (double t : t_list) {
    if (!(t >= 0.0)) fail(ErrorCode::Domain, "times must be nonnegative");
    t_max = std::max(t_max, t);
  }
  PreservationReport rep;
  rep.zone = 4.0 * std::sqrt(t_max);
  rep.field.slots = inst.spec.m();
  rep.field.dimension = inst.h.dimension();
  if (t_list.empty()) return rep;
  const TupleSet ts = make_tuples(inst, rep.zone);
  rep.stride_used = ts.stride;
  rep.mode = ts.tensor ? "tensor" : "latin-hypercube";
  const int n = inst.h.dimension();
  const std::vector<double> zero(n, 0.0);
  for (double t : t_list) {
    std::vector<GridFunction> evolved;
    for (const auto& f : inst.f_list) evolved.push_back(heat_evolve_grid(f, t, rule));
    const GridFunction h_t = heat_evolve_grid(inst.h, t, rule);
    auto slot = [&](std::size_t i, const Point& x) { return evolved[i].probit_at(view(x, n)); };
    auto target = [&](const Point& s) { return h_t.probit_at(view(s, n)); };
    const Evaluation ev = evaluate(inst, ts, rep.zone, slot, target, t,
                                   options.record_field ? &rep.field : nullptr, options.max_records);
    TimeSummary ts_out;
    ts_out.t = t;
    ts_out.min_C = ev.evaluated ? ev.min_C : 0.0;
    ts_out.evaluated = ev.evaluated;
    ts_out.skipped = ev.skipped;
    if (ev.evaluated) ts_out.argmin = tuple_coordinates(inst, ts, ev.argmin_tuple);
    bool origin_ok = inst.h.geometry().contains(zero);
    for (const auto& f : inst.f_list) origin_ok = origin_ok && f.geometry().contains(zero);
    if (origin_ok) ts_out.origin_C = deficit_at_origin(inst, t, rule);
    rep.per_t.push_back(ts_out);
  }
  return rep;
}

double counterexample_probit(double a, std::span<const double> x) {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return 1.0 - a * a * r2;
}

double counterexample_integral(double a, int n) {
  if (n < 1 || n > 3) fail(ErrorCode::InvalidArgument, "counterexample dimension must be 1..3");
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double norm = std::pow(2.0, 0.5 * n - 1.0) * std::tgamma(0.5 * n);
  auto density = [&](double r) { return std::pow(r, n - 1) * std::exp(-0.5 * r * r) / norm; };
  auto f = [&](double r) { return phi_cdf(1.0 - a * a * r * r) * density(r); };
  // Split at the transition scale of f.
  std::vector<double> cuts = {0.0};
  for (double k : {0.5, 1.0, 2.0, 3.0, 4.0})
    if (k / a < 12.0) cuts.push_back(k / a);
  cuts.push_back(12.0);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += GK::integrate(f, cuts[i], cuts[i + 1], 20, 1e-14);
  return total;
}

Counterexample build_counterexample(const AlphaSpec& spec, const CounterexampleOptions& options) {
  const AlphaCheck chk = check_alpha(spec);
  if (chk.feasible) fail(ErrorCode::Precondition, "coefficients satisfy the condition; no counterexample exists");
  const int n = options.n;
  if (n < 1 || n > 2) fail(ErrorCode::InvalidArgument, "counterexample grids support n = 1 or n = 2");
  Counterexample cx;
  if (options.a) {
    cx.a = *options.a;
    if (!(cx.a > 0.0)) fail(ErrorCode::InvalidArgument, "a must be positive");
    cx.integral_f = counterexample_integral(cx.a, n);
    if (!(cx.integral_f < 0.5)) {
      std::ostringstream os;
      os << "a = " << cx.a << " is too small: integral of f is " << cx.integral_f << " >= 1/2";
      fail(ErrorCode::Validation, os.str());
    }
  } else {
    bool found = false;
    for (double a : {1.0, 2.0, 4.0, 8.0}) {
      cx.a = a;
      cx.integral_f = counterexample_integral(a, n);
      if (cx.integral_f < 0.45) {
        found = true;
        break;
      }
    }
    if (!found) fail(ErrorCode::Validation, "no a in {1, 2, 4, 8} gives integral below 0.45");
  }
  cx.probit_integral = phi_inv(cx.integral_f).value();

  const double S = spec.sum();
  std::size_t j = spec.m();
  double best = 1.0;
  for (std::size_t i = 0; i < spec.m(); ++i) {
    if (spec.is_convex(i)) continue;
    const double excess = spec.alpha[i] - (S - spec.alpha[i]);
    if (excess > best) {
      best = excess;
      j = i;
    }
  }
  const double spacing = n == 1 ? options.spacing : std::max(options.spacing, 1.0 / 8.0);
  const std::size_t count = static_cast<std::size_t>(std::llround(2.0 * options.half_width / spacing)) + 1;
  const GridGeometry geom = GridGeometry::uniform(n, -options.half_width, options.half_width, count);
  const double a = cx.a;
  auto f = [a](std::span<const double> x) { return phi_cdf(counterexample_probit(a, x)); };
  auto g = [a](std::span<const double> x) { return phi_sf(counterexample_probit(a, x)); };
  const GridFunction fg = GridFunction::sample(geom, f, RangeTag::Probability, BoundaryPolicy::AffineTail);

  HypothesisInstance& inst = cx.instance;
  inst.spec = spec;
  if (S < 1.0) {
    cx.branch = "sum-below-one";
    cx.premise_slack = 1.0 - S;
    inst.h = fg;
    inst.f_list.assign(spec.m(), fg);
  } else {
    if (j == spec.m()) fail(ErrorCode::Internal, "infeasible spec without a violated clause");
    cx.branch = "dominant-index";
    cx.dominant = j;
    cx.premise_slack = spec.alpha[j] - (S - spec.alpha[j]) - 1.0;
    const GridFunction gg = GridFunction::sample(geom, g, RangeTag::Probability, BoundaryPolicy::AffineTail);
    inst.h = gg;
    inst.f_list.assign(spec.m(), fg);
    inst.f_list[j] = gg;
  }
  cx.predicted_C = cx.probit_integral * cx.premise_slack;
  // Sample where the probit values stay far from the clamp.
  const double r_slot = std::sqrt(3.0) / a, r_target = std::sqrt(7.0) / a;
  inst.plan.slot_boxes.assign(spec.m(), AxisBox::cube(n, r_slot / std::sqrt(static_cast<double>(n))));
  inst.plan.target_box = AxisBox::cube(n, r_target / std::sqrt(static_cast<double>(n)));
  inst.plan.stride = 1;
  inst.plan.max_tuples = 200000;
  cx.rule = n == 1 ? QuadratureRule::composite_gaussian(400) : QuadratureRule::gauss_hermite(64);
  return cx;
}

HypothesisInstance smooth_family_instance(const AlphaSpec& spec, const SmoothFamilyParams& p) {
  spec.validate();
  const std::size_t m = spec.m();
  if (p.offsets.size() != m || p.curvatures.size() != m)
    fail(ErrorCode::InvalidArgument, "smooth family needs one offset and curvature per slot");
  double Q = 0.0, csum = 0.0;
  bool affine = false;
  for (std::size_t i = 0; i < m; ++i) {
    if (p.curvatures[i] < 0.0) fail(ErrorCode::InvalidArgument, "curvatures must be nonnegative");
    if (p.curvatures[i] == 0.0) affine = true;
    else Q += spec.alpha[i] / p.curvatures[i];
    csum += spec.alpha[i] * p.offsets[i];
  }
  const double inv_Q = affine ? 0.0 : 1.0 / Q;
  const double slack = 0.25 * p.spacing * p.spacing * inv_Q;
  const std::size_t count = static_cast<std::size_t>(std::llround(2.0 * p.half_width / p.spacing)) + 1;
  const GridGeometry geom = GridGeometry::uniform(1, -p.half_width, p.half_width, count);
  HypothesisInstance inst;
  inst.spec = spec;
  for (std::size_t i = 0; i < m; ++i) {
    const double c = p.offsets[i], q = p.curvatures[i], u = p.slope;
    inst.f_list.push_back(GridFunction::sample(
        geom, [=](std::span<const double> x) { return phi_cdf(c + u * x[0] - q * x[0] * x[0]); },
        RangeTag::Probability, BoundaryPolicy::AffineTail));
  }
  const double u = p.slope;
  inst.h = GridFunction::sample(
      geom, [=](std::span<const double> x) { return phi_cdf(csum + u * x[0] - inv_Q * x[0] * x[0] + slack); },
      RangeTag::Probability, BoundaryPolicy::AffineTail);
  inst.plan.slot_boxes.assign(m, AxisBox::cube(1, p.sample_half_width));
  inst.plan.stride = 4;
  return inst;
}

SmoothFamilyParams random_smooth_params(std::size_t m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> off(-0.5, 0.5), curv(0.01, 0.03), slope(-0.2, 0.2);
  SmoothFamilyParams p;
  for (std::size_t i = 0; i < m; ++i) {
    p.offsets.push_back(off(rng));
    // Roughly one slot in five is probit-affine.
    p.curvatures.push_back(rng() % 5 == 0 ? 0.0 : curv(rng));
  }
  p.slope = slope(rng);
  p.half_width = 11.0;
  p.spacing = 1.0 / 32.0;
  p.sample_half_width = 3.0;
  return p;
}

double signed_distance(const RegionSet& region, const Eigen::VectorXd& x) {
  if (const auto* h = std::get_if<HalfSpace>(&region)) return h->u.dot(x) - h->b;
  if (const auto* b = std::get_if<Ball>(&region)) return (x - b->center).norm() - b->radius;
  const int dim = region_dimension(region);
  if (dim == 1) {
    const auto iv = to_intervals(region);
    if (iv.size() != 1) fail(ErrorCode::InvalidArgument, "distance needs a convex nonempty region");
    const double lo = iv[0].lo, hi = iv[0].hi;
    return std::max(lo - x(0), x(0) - hi);
  }
  if (const auto* bu = std::get_if<BoxUnion>(&region)) {
    if (bu->boxes.size() != 1) fail(ErrorCode::InvalidArgument, "distance needs a convex region");
    const Box& box = bu->boxes[0];
    Eigen::VectorXd out = (box.lo - x).cwiseMax(x - box.hi);
    if ((out.array() <= 0.0).all()) return out.maxCoeff();
    return out.cwiseMax(0.0).norm();
  }
  const auto& p = std::get<ConvexPolytope>(region);
  if (p.constraints.empty()) return -kInf;
  double inside = -kInf;
  for (const auto& c : p.constraints) inside = std::max(inside, c.u.dot(x) - c.b);
  if (inside <= 0.0) return inside;
  if (dim != 2) fail(ErrorCode::Unsupported, "Euclidean distance to polytopes only in dimension <= 2");
  const auto v = polygon_vertices(p);
  const Eigen::Vector2d q(x(0), x(1));
  double best = kInf;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Eigen::Vector2d a = v[i], b = v[(i + 1) % v.size()];
    const Eigen::Vector2d e = b - a;
    const double s = std::clamp((q - a).dot(e) / std::max(e.squaredNorm(), 1e-300), 0.0, 1.0);
    best = std::min(best, (q - (a + s * e)).norm());
  }
  return best;
}

namespace {

Eigen::VectorXd interior_point(const RegionSet& region) {
  const int dim = region_dimension(region);
  if (const auto* h = std::get_if<HalfSpace>(&region)) return (h->b - 1.0) * h->u;
  if (const auto* b = std::get_if<Ball>(&region)) return b->center;
  if (dim == 1) {
    const auto iv = to_intervals(region);
    if (iv.size() != 1 || !(iv[0].hi > iv[0].lo)) fail(ErrorCode::Degenerate, "region has empty interior");
    if (std::isfinite(iv[0].lo) && std::isfinite(iv[0].hi)) return Eigen::VectorXd::Constant(1, 0.5 * (iv[0].lo + iv[0].hi));
    if (std::isfinite(iv[0].hi)) return Eigen::VectorXd::Constant(1, iv[0].hi - 1.0);
    if (std::isfinite(iv[0].lo)) return Eigen::VectorXd::Constant(1, iv[0].lo + 1.0);
    return Eigen::VectorXd::Zero(1);
  }
  if (const auto* bu = std::get_if<BoxUnion>(&region)) {
    if (bu->boxes.size() != 1) fail(ErrorCode::InvalidArgument, "approximant needs a convex region");
    const Box& box = bu->boxes[0];
    if (((box.hi - box.lo).array() <= 0.0).any()) fail(ErrorCode::Degenerate, "region has empty interior");
    return 0.5 * (box.lo + box.hi);
  }
  const auto& p = std::get<ConvexPolytope>(region);
  if (p.constraints.empty()) return Eigen::VectorXd::Zero(dim);
  if (dim != 2) fail(ErrorCode::Unsupported, "polytope approximants only in dimension <= 2");
  const auto v = polygon_vertices(p);
  if (v.size() < 3) fail(ErrorCode::Degenerate, "region has empty interior");
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& q : v) c += q;
  c /= static_cast<double>(v.size());
  if (signed_distance(region, Eigen::VectorXd(c)) >= -1e-12) fail(ErrorCode::Degenerate, "region has empty interior");
  return Eigen::VectorXd(c);
}

// Largest t with x0 + t d inside the level set {dist <= level}; +inf if unbounded.
double ray_exit(const RegionSet& region, const Eigen::VectorXd& x0, const Eigen::VectorXd& d, double level) {
  auto inside = [&](double t) { return signed_distance(region, x0 + t * d) <= level; };
  double hi = 1.0;
  while (inside(hi)) {
    hi *= 2.0;
    if (hi > 1e9) return kInf;
  }
  double lo = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (inside(mid) ? lo : hi) = mid;
  }
  return lo;
}

double gauge(const RegionSet& region, const Eigen::VectorXd& x0, const Eigen::VectorXd& x, double level) {
  const Eigen::VectorXd d = x - x0;
  const double len = d.norm();
  if (len == 0.0) return 0.0;
  const double exit = ray_exit(region, x0, d / len, level);
  if (!std::isfinite(exit)) return 0.0;
  return len / exit;
}

std::vector<Eigen::VectorXd> directions(int dim) {
  std::vector<Eigen::VectorXd> out;
  if (dim == 1) {
    out.push_back(Eigen::VectorXd::Constant(1, 1.0));
    out.push_back(Eigen::VectorXd::Constant(1, -1.0));
  } else if (dim == 2) {
    for (int k = 0; k < 4096; ++k) {
      Eigen::VectorXd d(2);
      d << std::cos(2 * M_PI * k / 4096), std::sin(2 * M_PI * k / 4096);
      out.push_back(d);
    }
  } else {
    const int N = 4096;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < N; ++k) {
      const double z = 1.0 - 2.0 * (k + 0.5) / N, r = std::sqrt(1.0 - z * z);
      Eigen::VectorXd d(3);
      d << r * std::cos(golden * k), r * std::sin(golden * k), z;
      out.push_back(d);
    }
  }
  return out;
}

}  // namespace

ConcaveApproximant phi_concave_approximant(const RegionSet& region, double eps, double a, double b,
                                           const GridGeometry& geometry) {
  validate_region(region);
  if (!region_is_convex(region)) fail(ErrorCode::InvalidArgument, "approximant needs a convex region");
  if (!(b > a)) fail(ErrorCode::InvalidArgument, "need b > a");
  if (!(eps > 0.0)) fail(ErrorCode::InvalidArgument, "epsilon must be positive");
  const int dim = region_dimension(region);
  if (dim != geometry.dimension()) fail(ErrorCode::InvalidArgument, "grid and region dimensions differ");
  const Eigen::VectorXd x0 = interior_point(region);
  const double inner = eps / 3.0, outer = 5.0 * eps / 6.0;

  ConcaveApproximant out;
  out.center.assign(x0.data(), x0.data() + dim);
  const bool whole = std::holds_alternative<ConvexPolytope>(region) &&
                     std::get<ConvexPolytope>(region).constraints.empty();
  double rho_min = kInf;
  if (!whole) {
    for (const auto& d : directions(dim)) {
      const double t_out = ray_exit(region, x0, d, outer);
      if (!std::isfinite(t_out)) continue;
      rho_min = std::min(rho_min, t_out / ray_exit(region, x0, d, inner));
    }
  }
  out.rho_min = rho_min;
  out.c = std::isfinite(rho_min) ? (b - a) / (rho_min - 1.0) : 0.0;
  const double c = out.c;
  auto F0 = [&](const Eigen::VectorXd& x) {
    if (whole) return b;
    return b + c * (1.0 - std::max(gauge(region, x0, x, inner), 1.0));
  };
  // Radial bump of radius eps/6 sampled on a fine offset lattice.
  const double r = eps / 6.0;
  const int per_axis = dim == 1 ? 41 : (dim == 2 ? 11 : 7);
  std::vector<Eigen::VectorXd> offsets;
  std::vector<double> weights;
  const std::size_t total = static_cast<std::size_t>(std::pow(per_axis, dim));
  for (std::size_t flat = 0; flat < total; ++flat) {
    Eigen::VectorXd z(dim);
    std::size_t rem = flat;
    for (int d = 0; d < dim; ++d) {
      z(d) = -r + 2.0 * r * static_cast<double>(rem % per_axis) / (per_axis - 1);
      rem /= per_axis;
    }
    const double q = z.squaredNorm() / (r * r);
    if (q >= 1.0) continue;
    offsets.push_back(z);
    weights.push_back(std::exp(-1.0 / (1.0 - q)));
  }
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (double& w : weights) w /= wsum;

  std::vector<double> F(geometry.size());
  parallel_for(geometry.size(), [&](std::size_t begin, std::size_t end) {
    Eigen::VectorXd x(dim);
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = geometry.point(i);
      for (int d = 0; d < dim; ++d) x(d) = p[d];
      double acc = 0.0;
      for (std::size_t k = 0; k < offsets.size(); ++k) acc += weights[k] * F0(x + offsets[k]);
      F[i] = acc;
    }
  });
  out.F = ProbitField{geometry, F};
  std::vector<double> vals(F.size());
  for (std::size_t i = 0; i < F.size(); ++i) vals[i] = phi_cdf(F[i]);
  out.f = GridFunction(geometry, std::move(vals), RangeTag::Probability, BoundaryPolicy::AffineTail);
  return out;
}

std::vector<TrendPoint> approximant_trend(const RegionSet& region, const std::vector<double>& eps_list,
                                          const std::vector<double>& a_list, const std::vector<double>& b_list,
                                          const GridGeometry& geometry) {
  if (eps_list.size() != a_list.size() || a_list.size() != b_list.size())
    fail(ErrorCode::InvalidArgument, "trend lists must have equal length");
  std::vector<TrendPoint> out;
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    const auto ap = phi_concave_approximant(region, eps_list[k], a_list[k], b_list[k], geometry);
    TrendPoint tp{eps_list[k], a_list[k], b_list[k], 0.0};
    tp.integral = gamma_integral([&](std::span<const double> x) { return ap.f.value_at(x); }, geometry.dimension(),
                                 default_rule());
    out.push_back(tp);
  }
  return out;
}

double EpigraphLift::profile_at(std::span<const double> y) const {
  const int n = static_cast<int>(x.size());
  std::array<double, 3> p{};
  const double s = std::sqrt(t);
  for (int d = 0; d < n; ++d) p[d] = x[d] + s * y[d];
  return source.probit_at(std::span<const double>(p.data(), n));
}

EpigraphLift epigraph_lift(const GridFunction& f, double t, std::span<const double> x, const QuadratureRule& rule,
                           std::size_t profile_points) {
  const int n = f.dimension();
  if (n + 1 > 3) fail(ErrorCode::Unsupported, "lift dimension exceeds 3");
  if (!(t >= 0.0)) fail(ErrorCode::Domain, "t must be nonnegative");
  if (f.range() != RangeTag::Probability) fail(ErrorCode::InvalidArgument, "lift needs a probability grid");
  EpigraphLift lift;
  lift.source = f;
  lift.t = t;
  lift.x.assign(x.begin(), x.begin() + n);
  lift.dimension = n + 1;
  std::size_t M = n == 1 ? profile_points : std::min<std::size_t>(profile_points, 401);
  if (M % 2 == 0) ++M;
  if (M < 5) M = 5;
  lift.profile_geometry = GridGeometry::uniform(n, -10.0, 10.0, M);
  const double hy = 20.0 / static_cast<double>(M - 1);
  std::vector<double> w1(M);
  for (std::size_t k = 0; k < M; ++k) {
    const double simpson = (k == 0 || k == M - 1) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    w1[k] = simpson * hy / 3.0 * phi_pdf(-10.0 + hy * static_cast<double>(k));
  }
  lift.profile.resize(lift.profile_geometry.size());
  double measure = 0.0;
  for (std::size_t i = 0; i < lift.profile.size(); ++i) {
    const auto y = lift.profile_geometry.point(i);
    const auto idx = lift.profile_geometry.multi_index(i);
    lift.profile[i] = lift.profile_at(std::span<const double>(y.data(), n));
    double w = 1.0;
    for (int d = 0; d < n; ++d) w *= w1[idx[d]];
    measure += w * phi_cdf(lift.profile[i]);
  }
  lift.lift_measure = measure;
  lift.evolve_value = heat_evolve_point(f, t, x, rule);
  lift.discrepancy = std::abs(lift.lift_measure - lift.evolve_value);
  lift.consistent = lift.discrepancy <= 1e-4;
  lift.probit_concave = max_probit_second_difference(f) <= 1e-8;
  if (lift.probit_concave) lift.convexity = lift_midpoint_test(lift, 10000, kDefaultSeed);
  return lift;
}

namespace {

// True when the interpolation cell used at x has a clamped corner, or x sits on a constant extension.
bool touches_clamp(const GridFunction& f, std::span<const double> x) {
  const GridGeometry& g = f.geometry();
  const int n = g.dimension();
  if (f.policy() == BoundaryPolicy::ConstantExtension && !g.contains(x)) return true;
  std::array<std::size_t, 3> base{};
  for (int d = 0; d < n; ++d) {
    const Axis& a = g.axis(d);
    if (a.count == 1) continue;
    const double cell = std::clamp(std::floor((x[d] - a.origin) / a.spacing), 0.0, static_cast<double>(a.count - 2));
    base[d] = static_cast<std::size_t>(cell);
  }
  for (int c = 0; c < (1 << n); ++c) {
    std::array<std::size_t, 3> idx = base;
    for (int d = 0; d < n; ++d)
      if (((c >> d) & 1) && g.axis(d).count > 1) ++idx[d];
    if (is_clamped(f.values()[g.flat_index(idx)])) return true;
  }
  return false;
}

}  // namespace

MidpointReport lift_midpoint_test(const EpigraphLift& lift, std::size_t pairs, std::uint64_t seed, double tol) {
  const int n = static_cast<int>(lift.x.size());
  const double s = std::sqrt(lift.t);
  auto reaches_clamp = [&](const std::array<double, 3>& y) {
    std::array<double, 3> p{};
    for (int d = 0; d < n; ++d) p[d] = lift.x[d] + s * y[d];
    return touches_clamp(lift.source, std::span<const double>(p.data(), n));
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  std::exponential_distribution<double> depth(1.0);
  MidpointReport r;
  r.pairs = pairs;
  std::array<double, 3> y1{}, y2{}, ym{};
  for (std::size_t k = 0; k < pairs; ++k) {
    for (int d = 0; d < n; ++d) {
      y1[d] = unif(rng);
      y2[d] = unif(rng);
      ym[d] = 0.5 * (y1[d] + y2[d]);
    }
    if (reaches_clamp(y1) || reaches_clamp(y2) || reaches_clamp(ym)) {
      depth(rng);
      depth(rng);
      ++r.skipped;
      continue;
    }
    const double u1 = lift.profile_at(std::span<const double>(y1.data(), n)) - depth(rng);
    const double u2 = lift.profile_at(std::span<const double>(y2.data(), n)) - depth(rng);
    const double excess = 0.5 * (u1 + u2) - lift.profile_at(std::span<const double>(ym.data(), n));
    r.worst = std::max(r.worst, excess);
    if (excess > tol) ++r.failures;
  }
  return r;
}

}  // namespace ehrhard
