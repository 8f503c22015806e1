#include "ehrhard/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ehrhard/brascamp_lieb.hpp"
#include "ehrhard/errors.hpp"
#include "ehrhard/heat.hpp"
#include "ehrhard/lab.hpp"
#include "ehrhard/regions.hpp"

namespace ehrhard {

namespace {

FieldSpec field(std::string name, std::string type, std::string help, Json def = nullptr, bool required = false) {
  return FieldSpec{std::move(name), std::move(type), std::move(help), required, std::move(def)};
}

std::vector<FieldSpec> alpha_fields(bool required = true) {
  return {field("alpha", "number_list", "positive coefficients", required ? Json(nullptr) : Json::array(), required),
          field("iconv", "index_list", "1-based indices of convex slots", Json::array())};
}

std::vector<FieldSpec> datum_fields() {
  return {field("datum", "json", "explicit datum {N, entries: [{c, B: {rows, cols, data}}]}"),
          field("angles", "number_list", "planar frame angles in degrees", Json::array()),
          field("weight", "number", "frame weight; 0 picks 2/k", 0.0),
          field("N", "integer", "dimension of the coordinate datum", 2)};
}

std::vector<SubcommandSchema> build_schemas() {
  std::vector<SubcommandSchema> s;
  auto add = [&](std::string name, std::string help, std::vector<FieldSpec> fields) {
    s.push_back(SubcommandSchema{std::move(name), std::move(help), std::move(fields)});
  };
  auto cat = [](std::vector<FieldSpec> a, const std::vector<FieldSpec>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  add("check-alpha", "feasibility of the coefficient condition", alpha_fields());
  add("interval", "image interval formula against a brute-force minimum",
      cat(alpha_fields(), {field("d", "integer", "ambient dimension of the search", 2),
                           field("resolution", "integer", "angles per circle", 720),
                           field("bruteforce", "boolean", "run the brute-force oracle", true),
                           field("tol", "number", "allowed gap between formula and oracle", 5e-3)}));
  add("certificate", "elliptic certificate search",
      cat(alpha_fields(), {field("tol", "number", "residual tolerance", 1e-9)}));
  add("ehrhard", "Gaussian measures of sets and the deficit of their combination",
      cat(alpha_fields(), {field("regions", "json", "one region object per coefficient", nullptr, true),
                           field("method", "string", "auto, closed-form, quadrature or monte-carlo", "auto"),
                           field("samples", "integer", "Monte Carlo sample count", 1000000),
                           field("tol", "number", "allowed negative deficit", 1e-6)}));
  add("evolve", "heat semigroup on a grid with PDE residuals",
      {field("grid", "grid", "lo:hi:count per axis", "-8:8:257"),
       field("family", "string", "probit-affine, probit-quadratic, halfspace or ball", "probit-affine"),
       field("offset", "number", "offset b", 0.5), field("slope", "number", "slope along x1", 1.0),
       field("curvature", "number", "curvature of probit-quadratic", 0.5),
       field("radius", "number", "ball radius", 1.0),
       field("policy", "string", "constant-extension or affine-tail", "constant-extension"),
       field("t", "number_list", "evolution times", Json::array({1.0})),
       field("dt", "number", "time step for residuals; 0 skips them", 0.0),
       field("stencil", "number", "stencil spacing; 0 uses the grid spacing", 0.0),
       field("rule", "string", "gauss-hermite:<order> or composite:<panels>", "gauss-hermite:64"),
       field("residual_tol", "number", "fail above this heat residual; 0 disables", 0.0)});
  add("preserve", "deficit C(t) on a smooth probit-quadratic family",
      cat(alpha_fields(), {field("t", "number_list", "evolution times", Json::array({0.25, 1.0, 4.0})),
                           field("offsets", "number_list", "probit offsets; empty draws from the seed", Json::array()),
                           field("curvatures", "number_list", "probit curvatures", Json::array()),
                           field("slope", "number", "common slope", 0.0),
                           field("tol", "number", "allowed negative deficit", 1e-4),
                           field("max_records", "integer", "deficit records per time in the CSV", 10000),
                           field("spacing", "number", "grid spacing", 1.0 / 32.0),
                           field("half_width", "number", "grid half width", 11.0),
                           field("sample_half_width", "number", "sampling half width", 3.0)}));
  add("counterexample", "explicit violation for coefficients outside the condition",
      cat(alpha_fields(), {field("a", "number", "scale; 0 escalates automatically", 0.0),
                           field("n", "integer", "dimension", 1), field("t", "number", "evaluation time", 1.0)}));
  add("bl-validate", "geometric Brascamp-Lieb datum checks",
      cat(datum_fields(), {field("trials", "integer", "random vectors for the identities", 1000)}));
  auto preserve_fields = cat(datum_fields(), {field("t", "number_list", "evolution times", Json::array({0.5, 1.0, 2.0})),
                                              field("samples", "integer", "sample points", 256),
                                              field("gaussians", "json", "per entry {A, b, kappa}; null draws from the seed"),
                                              field("tol", "number", "deficit tolerance", 1e-3)});
  add("bl-preserve", "semigroup form of Brascamp-Lieb",
      cat(preserve_fields, {field("agreement_tol", "number", "numeric versus closed-form agreement", 1e-4)}));
  add("rbl-preserve", "semigroup form of reverse Brascamp-Lieb",
      cat(preserve_fields, {field("asymptotic_t", "number", "time for the large-t comparison; 0 skips", 100.0),
                            field("route", "string", "closed-form or grid", "closed-form")}));
  auto layout_fields = cat(cat({field("layout", "string", "reverse-bl, bl or ehrhard", "reverse-bl")}, datum_fields()),
                           cat(alpha_fields(false), {field("n", "integer", "block dimension of the ehrhard layout", 1)}));
  add("kernel-report", "first-order kernel structure", layout_fields);
  add("second-order", "positive semidefinite solution of the second-order constraints",
      cat(layout_fields, {field("max_iter", "integer", "alternating projection iterations", 5000)}));
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) {
    const auto b = part.find_first_not_of(" \t"), e = part.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : part.substr(b, e - b + 1));
  }
  return out;
}

double parse_number(const std::string& s) {
  if (s == "+inf" || s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
  return v;
}

long long parse_integer(const std::string& s) {
  std::size_t pos = 0;
  const long long v = std::stoll(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
  return v;
}

Json coerce(const FieldSpec& f, const Json& v) {
  const std::string& t = f.type;
  if (t == "json") {
    if (v.is_string()) return Json::parse(v.get<std::string>());
    return v;
  }
  if (t == "number") {
    if (v.is_string()) return number_json(parse_number(v.get<std::string>()));
    return number_json(json_number(v));
  }
  if (t == "integer") {
    if (v.is_string()) return parse_integer(v.get<std::string>());
    if (v.is_number_integer()) return v;
    if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) return static_cast<long long>(v.get<double>());
    throw std::invalid_argument("integer");
  }
  if (t == "boolean") {
    if (v.is_boolean()) return v;
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "true" || s == "1" || s == "yes") return true;
      if (s == "false" || s == "0" || s == "no") return false;
    }
    throw std::invalid_argument("boolean");
  }
  if (t == "string") {
    if (!v.is_string()) throw std::invalid_argument("string");
    return v;
  }
  if (t == "number_list") {
    Json out = Json::array();
    if (v.is_string()) {
      if (!v.get<std::string>().empty())
        for (const auto& p : split(v.get<std::string>(), ',')) out.push_back(number_json(parse_number(p)));
    } else if (v.is_array()) {
      for (const auto& x : v) out.push_back(number_json(json_number(x)));
    } else if (v.is_number()) {
      out.push_back(v);
    } else {
      throw std::invalid_argument("number_list");
    }
    return out;
  }
  if (t == "index_list") {
    Json out = Json::array();
    auto push = [&](long long k) {
      if (k < 1) throw std::invalid_argument("indices are 1-based");
      out.push_back(k);
    };
    if (v.is_string()) {
      if (!v.get<std::string>().empty())
        for (const auto& p : split(v.get<std::string>(), ',')) push(parse_integer(p));
    } else if (v.is_array()) {
      for (const auto& x : v) push(x.get<long long>());
    } else if (v.is_number_integer()) {
      push(v.get<long long>());
    } else {
      throw std::invalid_argument("index_list");
    }
    return out;
  }
  if (t == "grid") {
    if (v.is_string()) return grid_spec(parse_grid_spec(v.get<std::string>()));
    throw std::invalid_argument("grid");
  }
  throw std::invalid_argument("unknown field type");
}

AlphaSpec alpha_spec(const Json& p) {
  std::vector<double> alpha = json_number_list(p.at("alpha"));
  std::vector<std::size_t> conv;
  for (const auto& k : p.at("iconv")) conv.push_back(k.get<std::size_t>() - 1);
  AlphaSpec spec(alpha, conv);
  try {
    spec.validate();
  } catch (const Error& e) {
    fail(ErrorCode::Config, std::string("alpha/iconv: ") + e.what());
  }
  return spec;
}

QuadratureRule parse_rule(const std::string& s) {
  const auto parts = split(s, ':');
  if (parts.size() == 2) {
    try {
      const int k = static_cast<int>(parse_integer(parts[1]));
      if (parts[0] == "gauss-hermite") return QuadratureRule::gauss_hermite(k);
      if (parts[0] == "composite") return QuadratureRule::composite_gaussian(k);
    } catch (const std::invalid_argument&) {
    }
  }
  fail(ErrorCode::Config, "rule '" + s + "' is not gauss-hermite:<order> or composite:<panels>");
}

Json measure_json(const MeasureResult& m) {
  return Json{{"probability", number_json(m.probability)}, {"complement", number_json(m.complement)},
              {"probit", number_json(m.probit().value())}, {"error_bound", number_json(m.error_bound)},
              {"method", m.method},                       {"approximate", m.approximate}};
}

Json point_json(const std::vector<double>& x) {
  Json out = Json::array();
  for (double v : x) out.push_back(number_json(v));
  return out;
}

struct Outcome {
  int exit_code = kExitPass;
  Json results;
  Json details = nullptr;
  std::string csv;
};

Outcome run_check_alpha(const Json& p) {
  const AlphaCheck c = check_alpha(alpha_spec(p));
  Outcome o;
  o.results = Json{{"feasible", c.feasible}, {"sum", number_json(c.sum)}, {"violations", c.violations}};
  o.exit_code = c.feasible ? kExitPass : kExitInfeasible;
  return o;
}

Outcome run_interval(const Json& p) {
  const AlphaSpec spec = alpha_spec(p);
  const IntervalJ J = phi_image_interval(spec);
  std::vector<double> ordered;
  std::size_t k = 0;
  for (std::size_t i = 0; i < spec.m(); ++i)
    if (!spec.is_convex(i)) ordered.push_back(spec.alpha[i]), ++k;
  for (std::size_t i = 0; i < spec.m(); ++i)
    if (spec.is_convex(i)) ordered.push_back(spec.alpha[i]);
  Outcome o;
  o.results = Json{{"lo", number_json(J.lo)}, {"hi", number_json(J.hi)}, {"spheres", k}, {"brute_min", nullptr},
                   {"difference", nullptr}, {"within", nullptr}};
  if (p.at("bruteforce").get<bool>() && spec.m() <= 4) {
    const double brute = phi_min_bruteforce(ordered, k, p.at("d").get<int>(), p.at("resolution").get<int>());
    const double diff = std::abs(J.lo - brute);
    const bool within = diff <= json_number(p.at("tol"));
    o.results["brute_min"] = number_json(brute);
    o.results["difference"] = number_json(diff);
    o.results["within"] = within;
    if (!within) o.exit_code = kExitAssertion;
  }
  return o;
}

Outcome run_certificate(const Json& p, std::uint64_t seed) {
  const AlphaSpec spec = alpha_spec(p);
  const double tol = json_number(p.at("tol"));
  Outcome o;
  try {
    const auto cert = find_certificate(spec, tol, seed);
    o.results = certificate_json(cert);
    o.results["feasible"] = true;
    const bool ok = residuals_within(cert.residuals, tol);
    o.results["within"] = ok;
    if (!ok) o.exit_code = kExitAssertion;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Infeasible) throw;
    o.results = Json{{"feasible", false}, {"reason", e.what()}};
    o.exit_code = kExitInfeasible;
  }
  return o;
}

Outcome run_ehrhard(const Json& p, std::uint64_t seed) {
  const AlphaSpec spec = alpha_spec(p);
  const Json& rj = p.at("regions");
  if (!rj.is_array()) fail(ErrorCode::Config, "regions must be an array");
  std::vector<RegionSet> regions;
  for (const auto& r : rj) regions.push_back(json_region(r));
  MeasureMethod method = MeasureMethod::parse(p.at("method").get<std::string>());
  method.samples = p.at("samples").get<std::size_t>();
  method.seed = seed;
  const DeficitResult d = ehrhard_deficit(spec, regions, method);
  Outcome o;
  Json parts = Json::array();
  for (const auto& m : d.parts) parts.push_back(measure_json(m));
  o.results = Json{{"deficit", number_json(d.deficit.value())},
                   {"error_budget", number_json(d.error_budget)},
                   {"approximate", d.approximate},
                   {"combined", measure_json(d.combined)},
                   {"parts", parts},
                   {"sum_set", d.sum_set ? region_json(*d.sum_set) : Json(nullptr)}};
  const double tol = std::max(json_number(p.at("tol")), d.error_budget);
  if (d.deficit.value() < -tol) o.exit_code = kExitAssertion;
  return o;
}

Outcome run_evolve(const Json& p) {
  const GridGeometry geom = parse_grid_spec(p.at("grid").get<std::string>());
  const std::string family = p.at("family").get<std::string>();
  const double b = json_number(p.at("offset")), u = json_number(p.at("slope")), q = json_number(p.at("curvature")),
               r = json_number(p.at("radius"));
  Evaluable f;
  bool smooth = true;
  if (family == "probit-affine") {
    f = [=](std::span<const double> x) { return phi_cdf(b + u * x[0]); };
  } else if (family == "probit-quadratic") {
    f = [=](std::span<const double> x) {
      double s = 0.0;
      for (double v : x) s += v * v;
      return phi_cdf(b - q * s);
    };
  } else if (family == "halfspace") {
    smooth = false;
    f = [=](std::span<const double> x) { return x[0] <= b ? 1.0 : 0.0; };
  } else if (family == "ball") {
    smooth = false;
    f = [=](std::span<const double> x) {
      double s = 0.0;
      for (double v : x) s += v * v;
      return s <= r * r ? 1.0 : 0.0;
    };
  } else {
    fail(ErrorCode::Config, "unknown family '" + family + "'");
  }
  BoundaryPolicy policy;
  try {
    policy = parse_policy(p.at("policy").get<std::string>());
  } catch (const Error& e) {
    fail(ErrorCode::Config, e.what());
  }
  const GridFunction g = GridFunction::sample(geom, f, RangeTag::Probability, policy);
  const QuadratureRule rule = parse_rule(p.at("rule").get<std::string>());
  const double dt = json_number(p.at("dt"));
  const double h = json_number(p.at("stencil")) > 0.0 ? json_number(p.at("stencil")) : geom.axis(0).spacing;
  const double residual_tol = json_number(p.at("residual_tol"));
  Outcome o;
  o.results = Json::array();
  const std::vector<double> zero(geom.dimension(), 0.0);
  GridFunction last = g;
  for (double t : json_number_list(p.at("t"))) {
    if (!(t >= 0.0)) fail(ErrorCode::Config, "times must be nonnegative");
    const GridFunction e = heat_evolve_grid(g, t, rule);
    last = e;
    const auto [mn, mx] = std::minmax_element(e.values().begin(), e.values().end());
    Json row{{"t", number_json(t)}, {"min", number_json(*mn)}, {"max", number_json(*mx)},
             {"origin", geom.contains(zero) ? number_json(heat_evolve_point(g, t, zero, rule)) : Json(nullptr)},
             {"heat_residual", nullptr}, {"probit_residual", nullptr}};
    if (dt > 0.0 && t > dt) {
      const auto res = heat_pde_residual(g, t, dt, h, rule);
      row["heat_residual"] = Json{{"max_abs", number_json(res.max_abs)}, {"interior_count", res.interior_count}};
      if (residual_tol > 0.0 && res.max_abs > residual_tol) o.exit_code = kExitAssertion;
      if (smooth) {
        try {
          const auto Fm = probit_transform(heat_evolve_grid(g, t - dt, rule));
          const auto F0 = probit_transform(e);
          const auto Fp = probit_transform(heat_evolve_grid(g, t + dt, rule));
          const auto pr = probit_pde_residual(Fm, F0, Fp, dt, h, 4.0 * std::sqrt(t + dt));
          row["probit_residual"] = Json{{"max_abs", number_json(pr.max_abs)}, {"interior_count", pr.interior_count}};
        } catch (const Error& err) {
          if (err.code() != ErrorCode::Domain) throw;
        }
      }
    }
    o.results.push_back(row);
  }
  o.details = Json{{"grid", grid_spec(geom)}, {"policy", policy_name(policy)}, {"rule", rule.describe()}};
  o.csv = grid_csv(last);
  return o;
}

Outcome run_preserve(const Json& p, std::uint64_t seed) {
  const AlphaSpec spec = alpha_spec(p);
  SmoothFamilyParams sp;
  const auto offsets = json_number_list(p.at("offsets"));
  if (offsets.empty()) {
    std::mt19937_64 rng(seed);
    sp = random_smooth_params(spec.m(), rng);
  } else {
    sp.offsets = offsets;
    sp.curvatures = json_number_list(p.at("curvatures"));
    sp.slope = json_number(p.at("slope"));
    if (sp.curvatures.size() != offsets.size()) fail(ErrorCode::Config, "offsets and curvatures differ in length");
  }
  sp.spacing = json_number(p.at("spacing"));
  sp.half_width = json_number(p.at("half_width"));
  sp.sample_half_width = json_number(p.at("sample_half_width"));
  const HypothesisInstance inst = smooth_family_instance(spec, sp);
  PreservationOptions opts;
  opts.record_field = true;
  opts.max_records = p.at("max_records").get<std::size_t>();
  const auto rep = preservation_check(inst, json_number_list(p.at("t")), opts);
  const double tol = json_number(p.at("tol"));
  Outcome o;
  o.results = Json::array();
  for (const auto& ts : rep.per_t) {
    o.results.push_back(Json{{"t", number_json(ts.t)},
                             {"min_C", number_json(ts.min_C)},
                             {"evaluated", ts.evaluated},
                             {"skipped", ts.skipped},
                             {"argmin", point_json(ts.argmin)},
                             {"origin_C", ts.origin_C ? number_json(*ts.origin_C) : Json(nullptr)}});
    if (ts.min_C < -tol) o.exit_code = kExitAssertion;
  }
  o.details = Json{{"offsets", point_json(sp.offsets)}, {"curvatures", point_json(sp.curvatures)},
                   {"slope", number_json(sp.slope)},    {"zone", number_json(rep.zone)},
                   {"stride", rep.stride_used},         {"mode", rep.mode}};
  o.csv = deficit_csv(rep.field);
  return o;
}

Outcome run_counterexample(const Json& p) {
  const AlphaSpec spec = alpha_spec(p);
  CounterexampleOptions opts;
  if (json_number(p.at("a")) > 0.0) opts.a = json_number(p.at("a"));
  opts.n = p.at("n").get<int>();
  const Counterexample cx = build_counterexample(spec, opts);
  const MarginReport margin = hypothesis_margin(cx.instance);
  const double t = json_number(p.at("t"));
  const double C = deficit_at_origin(cx.instance, t, cx.rule);
  Outcome o;
  o.results = Json{{"branch", cx.branch},
                   {"dominant", cx.dominant ? Json(*cx.dominant + 1) : Json(nullptr)},
                   {"a", number_json(cx.a)},
                   {"integral_f", number_json(cx.integral_f)},
                   {"probit_integral", number_json(cx.probit_integral)},
                   {"premise_slack", number_json(cx.premise_slack)},
                   {"premise_margin", number_json(margin.min_margin)},
                   {"t", number_json(t)},
                   {"C_origin", number_json(C)},
                   {"predicted_C", number_json(cx.predicted_C)},
                   {"rule", cx.rule.describe()}};
  const bool shown = margin.min_margin >= -1e-9 && C <= -1e-3;
  o.results["violation_demonstrated"] = shown;
  if (!shown) o.exit_code = kExitAssertion;
  return o;
}

BLDatum datum_from(const Json& p) {
  const Json& d = p.at("datum");
  if (!d.is_null()) {
    BLDatum out;
    out.N = d.at("N").get<int>();
    for (const auto& e : d.at("entries")) out.entries.push_back(BLEntry{json_number(e.at("c")), json_matrix(e.at("B"))});
    return out;
  }
  const auto angles = json_number_list(p.at("angles"));
  if (!angles.empty()) {
    const double w = json_number(p.at("weight"));
    return angle_frame_datum(angles, w > 0.0 ? w : 2.0 / static_cast<double>(angles.size()));
  }
  const int N = p.at("N").get<int>();
  if (N < 1 || N > 12) fail(ErrorCode::Config, "N must be in 1..12");
  return coordinate_datum(N);
}

std::vector<SourcePtr> gaussians_from(const Json& p, const BLDatum& datum, std::uint64_t seed) {
  std::vector<SourcePtr> out;
  const Json& g = p.at("gaussians");
  if (!g.is_null()) {
    if (!g.is_array() || g.size() != datum.m()) fail(ErrorCode::Config, "gaussians needs one entry per datum entry");
    for (const auto& e : g)
      out.push_back(std::make_shared<GaussianSource>(json_matrix(e.at("A")), json_vector(e.at("b")),
                                                     e.contains("kappa") ? json_number(e.at("kappa")) : 0.0));
    return out;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> eig(0.25, 2.0), shift(-0.3, 0.3);
  for (const auto& e : datum.entries) {
    const Eigen::Index n = e.B.rows();
    Eigen::MatrixXd G(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) G(r, c) = normal(rng);
    const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
    Eigen::VectorXd lam(n), b(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      lam(k) = eig(rng);
      b(k) = shift(rng);
    }
    Eigen::MatrixXd A = Q * lam.asDiagonal() * Q.transpose();
    out.push_back(std::make_shared<GaussianSource>(0.5 * (A + A.transpose()), b, 0.0));
  }
  return out;
}

Json validation_json(const BLValidation& v) {
  return Json{{"row_residual", number_json(v.row_residual)},
              {"decomposition_residual", number_json(v.decomposition_residual)},
              {"trace_residual", number_json(v.trace_residual)},
              {"pass", v.pass}};
}

Outcome run_bl_validate(const Json& p, std::uint64_t seed) {
  const BLDatum datum = datum_from(p);
  const auto v = validate_bl_datum(datum);
  const auto trials = p.at("trials").get<std::size_t>();
  Outcome o;
  o.results = validation_json(v);
  o.results["pythagoras"] = number_json(pythagoras_check(datum, trials, seed));
  o.results["contraction"] = number_json(contraction_check(datum, trials, seed));
  if (!v.pass) o.exit_code = kExitAssertion;
  return o;
}

Outcome run_bl_preserve(const Json& p, std::uint64_t seed) {
  const BLDatum datum = datum_from(p);
  const auto f = gaussians_from(p, datum, seed);
  const auto t_list = json_number_list(p.at("t"));
  BLOptions opts;
  opts.samples = p.at("samples").get<std::size_t>();
  opts.seed = seed;
  const auto numeric = bl_preservation_check(datum, f, t_list, opts);
  opts.h = product_pullback(datum, f, true);
  const auto analytic = bl_preservation_check(datum, f, t_list, opts);
  const double tol = json_number(p.at("tol")), agree = json_number(p.at("agreement_tol"));
  Outcome o;
  o.results = Json::array();
  for (std::size_t k = 0; k < numeric.per_t.size(); ++k) {
    const double diff = std::abs(numeric.per_t[k].extreme - analytic.per_t[k].extreme);
    o.results.push_back(Json{{"t", number_json(numeric.per_t[k].t)},
                             {"max_deficit", number_json(numeric.per_t[k].extreme)},
                             {"closed_form_max_deficit", number_json(analytic.per_t[k].extreme)},
                             {"difference", number_json(diff)},
                             {"witness", point_json(numeric.per_t[k].witness)}});
    if (numeric.per_t[k].extreme > tol || diff > agree) o.exit_code = kExitAssertion;
  }
  o.details = Json{{"validation", validation_json(validate_bl_datum(datum))}, {"h", numeric.h_kind}};
  return o;
}

Outcome run_rbl_preserve(const Json& p, std::uint64_t seed) {
  const BLDatum datum = datum_from(p);
  const auto f = gaussians_from(p, datum, seed);
  const auto t_list = json_number_list(p.at("t"));
  const double tol = json_number(p.at("tol"));
  BLOptions opts;
  opts.samples = p.at("samples").get<std::size_t>();
  opts.seed = seed;
  const std::string route = p.at("route").get<std::string>();
  if (route == "closed-form") {
    opts.h = gaussian_sup_convolution(datum, f);
  } else if (route == "grid") {
    if (datum.N > 2) fail(ErrorCode::Config, "grid route supports N <= 2");
    const std::size_t count = datum.N == 1 ? 257 : 65;
    opts.h = std::make_shared<GridSource>(
        sup_convolution_grid(datum, f, GridGeometry::uniform(datum.N, -8.0, 8.0, count), 10000, seed));
    opts.premise_tol = tol;
  } else {
    fail(ErrorCode::Config, "route must be closed-form or grid");
  }
  const auto rep = rbl_preservation_check(datum, f, t_list, opts);
  Outcome o;
  o.results = Json::array();
  for (const auto& r : rep.per_t) {
    o.results.push_back(Json{{"t", number_json(r.t)}, {"min_deficit", number_json(r.extreme)},
                             {"witness", point_json(r.witness)}});
    if (r.extreme < -tol) o.exit_code = kExitAssertion;
  }
  o.details = Json{{"premise_margin", number_json(rep.premise_margin)}, {"h", rep.h_kind}, {"asymptotic", nullptr}};
  const double T = json_number(p.at("asymptotic_t"));
  if (T > 0.0) {
    const auto a = semigroup_asymptotics(datum, f, *opts.h, T);
    const bool ordered = a.log_gap >= -1e-9;
    o.details["asymptotic"] = Json{{"t", number_json(T)},
                                   {"lhs", number_json(a.lhs)},
                                   {"rhs", number_json(a.rhs)},
                                   {"log_gap", number_json(a.log_gap)},
                                   {"ordered", ordered}};
    if (!ordered) o.exit_code = kExitAssertion;
  }
  return o;
}

GBLDatum layout_from(const Json& p) {
  const std::string layout = p.at("layout").get<std::string>();
  if (layout == "reverse-bl") return reverse_bl_layout(datum_from(p));
  if (layout == "bl") return bl_layout(datum_from(p));
  if (layout == "ehrhard") {
    if (p.at("alpha").empty()) fail(ErrorCode::Config, "ehrhard layout needs alpha");
    return ehrhard_layout(alpha_spec(p), p.at("n").get<int>());
  }
  fail(ErrorCode::Config, "layout must be reverse-bl, bl or ehrhard");
}

Outcome run_kernel_report(const Json& p, std::uint64_t seed) {
  const GBLDatum g = layout_from(p);
  const KernelReport k = kernel_structure(g, seed);
  Json R = Json::array();
  for (const auto& r : k.R) R.push_back(matrix_json(r));
  Outcome o;
  o.results = Json{{"layout", p.at("layout")},
                   {"N", g.N},
                   {"block_sizes", k.block_sizes},
                   {"kernel_dim", k.kernel.cols()},
                   {"equal_norm", k.equal_norm},
                   {"norm_spread", number_json(k.norm_spread)},
                   {"isometry_residual", number_json(k.isometry_residual)},
                   {"reconstruction_residual", number_json(k.reconstruction_residual)},
                   {"R", R}};
  return o;
}

Outcome run_second_order(const Json& p, std::uint64_t seed) {
  const GBLDatum g = layout_from(p);
  const auto r = second_order_feasible(g, p.at("max_iter").get<int>(), seed);
  Outcome o;
  o.results = Json{{"found", r.found},
                   {"status", r.status},
                   {"A", matrix_json(r.A)},
                   {"constraint_residual", number_json(r.constraint_residual)},
                   {"min_eigenvalue", number_json(r.min_eigenvalue)},
                   {"iterations", r.iterations},
                   {"sample_S", number_json(r.sample_S)},
                   {"sample_P", number_json(r.sample_P)},
                   {"certificate_residual", nullptr}};
  if (p.at("layout") == "ehrhard") {
    const AlphaSpec spec = alpha_spec(p);
    if (check_alpha(spec).feasible) {
      const auto cert = find_certificate(spec, 1e-9, seed);
      const int n = p.at("n").get<int>();
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(cert.B.rows() * n, cert.B.cols() * n);
      for (Eigen::Index r = 0; r < cert.B.rows(); ++r)
        for (Eigen::Index c = 0; c < cert.B.cols(); ++c)
          A.block(r * n, c * n, n, n) = cert.B(r, c) * Eigen::MatrixXd::Identity(n, n);
      o.results["certificate_residual"] = number_json(second_order_residual(g, A));
    }
  }
  if (!r.found) o.exit_code = kExitInfeasible;
  return o;
}

bool safe_name(const std::string& s) {
  if (s.empty() || s == "." || s == "..") return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
  return true;
}

}  // namespace

const std::vector<SubcommandSchema>& subcommand_schemas() {
  static const std::vector<SubcommandSchema> schemas = build_schemas();
  return schemas;
}

const SubcommandSchema& schema_for(const std::string& subcommand) {
  for (const auto& s : subcommand_schemas())
    if (s.name == subcommand) return s;
  fail(ErrorCode::InvalidArgument, "unknown subcommand '" + subcommand + "'");
}

Json schemas_json() {
  Json out = Json::array();
  for (const auto& s : subcommand_schemas()) {
    Json fields = Json::array();
    for (const auto& f : s.fields)
      fields.push_back(Json{{"name", f.name}, {"type", f.type}, {"help", f.help}, {"required", f.required},
                            {"default", f.default_value}});
    out.push_back(Json{{"name", s.name}, {"help", s.help}, {"fields", fields}});
  }
  return out;
}

Json resolve_params(const SubcommandSchema& schema, const Json& params) {
  if (!params.is_object()) fail(ErrorCode::Config, "params must be an object");
  std::vector<std::string> problems;
  Json out = Json::object();
  for (auto it = params.begin(); it != params.end(); ++it) {
    bool known = false;
    for (const auto& f : schema.fields) known = known || f.name == it.key();
    if (!known) problems.push_back(it.key() + " (unknown field)");
  }
  for (const auto& f : schema.fields) {
    if (!params.contains(f.name)) {
      if (f.required) problems.push_back(f.name + " (required)");
      else out[f.name] = f.default_value;
      continue;
    }
    try {
      out[f.name] = coerce(f, params.at(f.name));
    } catch (const std::exception&) {
      problems.push_back(f.name + " (expected " + f.type + ")");
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid parameters for " + schema.name + ":";
    for (const auto& p : problems) msg += " " + p + ";";
    msg.pop_back();
    fail(ErrorCode::Config, msg);
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& subcommand) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : subcommand) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return seed ^ h;
}

std::uint64_t parse_seed(const Json& j) {
  if (j.is_number_unsigned() || j.is_number_integer()) return j.get<std::uint64_t>();
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0) s = s.substr(2);
    if (s.empty() || s.size() > 16 || s.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
      fail(ErrorCode::Config, "seed must be a hexadecimal string");
    return std::stoull(s, nullptr, 16);
  }
  fail(ErrorCode::Config, "seed must be a hexadecimal string or an integer");
}

std::string seed_hex(std::uint64_t seed) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(seed));
  return buf;
}

Scenario parse_scenario(const Json& j) {
  const Json& s = j.contains("scenario") && j.at("scenario").is_object() ? j.at("scenario") : j;
  if (!s.is_object()) fail(ErrorCode::Config, "scenario must be a JSON object");
  Scenario out;
  if (!s.contains("subcommand") || !s.at("subcommand").is_string()) fail(ErrorCode::Config, "scenario needs a subcommand");
  out.subcommand = s.at("subcommand").get<std::string>();
  const SubcommandSchema& schema = schema_for(out.subcommand);
  if (s.contains("name")) {
    if (!s.at("name").is_string()) fail(ErrorCode::Config, "name must be a string");
    out.name = s.at("name").get<std::string>();
  }
  if (!safe_name(out.name)) fail(ErrorCode::Config, "name must use letters, digits, '-', '_' or '.'");
  if (s.contains("seed")) out.seed = parse_seed(s.at("seed"));
  out.params = resolve_params(schema, s.value("params", Json::object()));
  return out;
}

Json scenario_json(const Scenario& s) {
  return Json{{"name", s.name}, {"subcommand", s.subcommand}, {"params", s.params}, {"seed", seed_hex(s.seed)}};
}

RunReport run_scenario(const Scenario& scenario) {
  const SubcommandSchema& schema = schema_for(scenario.subcommand);
  const Json p = resolve_params(schema, scenario.params);
  const std::uint64_t seed = derive_seed(scenario.seed, scenario.subcommand);
  const std::string& sub = scenario.subcommand;
  Outcome o;
  if (sub == "check-alpha") o = run_check_alpha(p);
  else if (sub == "interval") o = run_interval(p);
  else if (sub == "certificate") o = run_certificate(p, seed);
  else if (sub == "ehrhard") o = run_ehrhard(p, seed);
  else if (sub == "evolve") o = run_evolve(p);
  else if (sub == "preserve") o = run_preserve(p, seed);
  else if (sub == "counterexample") o = run_counterexample(p);
  else if (sub == "bl-validate") o = run_bl_validate(p, seed);
  else if (sub == "bl-preserve") o = run_bl_preserve(p, seed);
  else if (sub == "rbl-preserve") o = run_rbl_preserve(p, seed);
  else if (sub == "kernel-report") o = run_kernel_report(p, seed);
  else if (sub == "second-order") o = run_second_order(p, seed);
  else fail(ErrorCode::Internal, "subcommand without a runner: " + sub);
  Scenario resolved = scenario;
  resolved.params = p;
  RunReport rep;
  rep.exit_code = o.exit_code;
  const char* status = o.exit_code == kExitPass ? "pass" : (o.exit_code == kExitInfeasible ? "infeasible-or-unknown" : "fail");
  rep.summary = Json{{"scenario", scenario_json(resolved)},
                     {"results", o.results},
                     {"status", status},
                     {"exit_code", o.exit_code}};
  if (!o.details.is_null()) rep.summary["details"] = o.details;
  rep.field_csv = std::move(o.csv);
  return rep;
}

void emit_report(const Scenario& scenario, const RunReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(out_dir) / scenario.name;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  auto write = [&](const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    out << text;
    if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
  };
  write(dir / (scenario.subcommand + ".summary.json"), dump_json(report.summary));
  if (!report.field_csv.empty()) write(dir / (scenario.subcommand + ".field.csv"), report.field_csv);
}

}  // namespace ehrhard
