#include "ehrhard/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "ehrhard/errors.hpp"

namespace ehrhard {

namespace {

void write_string(std::string& out, const std::string& s) {
  out += Json(s).dump();
}

void write(std::string& out, const Json& j, int indent, int depth) {
  const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close = indent > 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) {
          out += ',';
          out += nl;
        }
        first = false;
        out += pad;
        write_string(out, it.key());
        out += indent > 0 ? ": " : ":";
        write(out, it.value(), indent, depth + 1);
      }
      out += nl;
      out += close;
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      bool scalars = true;
      for (const auto& v : j) scalars = scalars && !v.is_structured();
      if (scalars) {
        out += '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += indent > 0 ? ", " : ",";
          write(out, j[i], indent, depth + 1);
        }
        out += ']';
        return;
      }
      out += '[';
      out += nl;
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) {
          out += ',';
          out += nl;
        }
        out += pad;
        write(out, j[i], indent, depth + 1);
      }
      out += nl;
      out += close;
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (std::isnan(v)) {
        out += "\"nan\"";
      } else if (std::isinf(v)) {
        out += v > 0 ? "\"+inf\"" : "\"-inf\"";
      } else {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        std::string s(buf);
        if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
        out += s;
      }
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const Json& j, int indent) {
  std::string out;
  write(out, j, indent, 0);
  out += '\n';
  return out;
}

Json number_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v;
}

double json_number(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "+inf" || s == "inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
    if (s == "-inf" || s == "-Infinity") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  fail(ErrorCode::Config, "expected a number, got " + j.dump());
}

std::vector<double> json_number_list(const Json& j) {
  if (!j.is_array()) fail(ErrorCode::Config, "expected an array of numbers, got " + j.dump());
  std::vector<double> out;
  for (const auto& v : j) out.push_back(json_number(v));
  return out;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json data = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(number_json(m(r, c)));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd json_matrix(const Json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    fail(ErrorCode::Config, "matrix needs rows, cols and row-major data");
  const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
  const auto data = json_number_list(j.at("data"));
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
    fail(ErrorCode::Config, "matrix data length does not match its shape");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  return m;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_json(v(i)));
  return out;
}

Eigen::VectorXd json_vector(const Json& j) {
  const auto xs = json_number_list(j);
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

Json region_json(const RegionSet& r) {
  if (const auto* h = std::get_if<HalfSpace>(&r))
    return Json{{"type", "halfspace"}, {"u", vector_json(h->u)}, {"b", number_json(h->b)}};
  if (const auto* b = std::get_if<Ball>(&r))
    return Json{{"type", "ball"}, {"center", vector_json(b->center)}, {"radius", number_json(b->radius)}};
  if (const auto* p = std::get_if<ConvexPolytope>(&r)) {
    Json cons = Json::array();
    for (const auto& c : p->constraints) cons.push_back(Json{{"u", vector_json(c.u)}, {"b", number_json(c.b)}});
    return Json{{"type", "polytope"}, {"dim", p->dim}, {"constraints", cons}};
  }
  const auto& bu = std::get<BoxUnion>(r);
  Json boxes = Json::array();
  for (const auto& b : bu.boxes) boxes.push_back(Json{{"lo", vector_json(b.lo)}, {"hi", vector_json(b.hi)}});
  return Json{{"type", "boxes"}, {"dim", bu.dim}, {"boxes", boxes}};
}

RegionSet json_region(const Json& j) {
  if (!j.is_object() || !j.contains("type")) fail(ErrorCode::Config, "region needs a type field");
  const std::string type = j.at("type").get<std::string>();
  RegionSet out;
  if (type == "halfspace") {
    out = HalfSpace{json_vector(j.at("u")), json_number(j.at("b"))};
  } else if (type == "ball") {
    out = Ball{json_vector(j.at("center")), json_number(j.at("radius"))};
  } else if (type == "polytope") {
    ConvexPolytope p;
    p.dim = j.at("dim").get<int>();
    for (const auto& c : j.value("constraints", Json::array()))
      p.constraints.push_back(HalfSpace{json_vector(c.at("u")), json_number(c.at("b"))});
    out = p;
  } else if (type == "boxes" || type == "box") {
    BoxUnion bu;
    if (type == "box") {
      bu.boxes.push_back(Box{json_vector(j.at("lo")), json_vector(j.at("hi"))});
    } else {
      for (const auto& b : j.at("boxes")) bu.boxes.push_back(Box{json_vector(b.at("lo")), json_vector(b.at("hi"))});
    }
    bu.dim = j.contains("dim") ? j.at("dim").get<int>()
                               : (bu.boxes.empty() ? 1 : static_cast<int>(bu.boxes[0].lo.size()));
    out = bu;
  } else if (type == "intervals") {
    std::vector<Interval> iv;
    for (const auto& p : j.at("intervals")) {
      if (!p.is_array() || p.size() != 2) fail(ErrorCode::Config, "intervals are [lo, hi] pairs");
      iv.push_back(Interval{json_number(p[0]), json_number(p[1])});
    }
    out = from_intervals(iv);
  } else {
    fail(ErrorCode::Config, "unknown region type '" + type + "'");
  }
  try {
    validate_region(out);
  } catch (const Error& e) {
    fail(ErrorCode::Config, std::string("invalid region: ") + e.what());
  }
  return out;
}

Json certificate_json(const EllipticCertificate& c) {
  Json conv = Json::array();
  for (auto i : c.i_conv) conv.push_back(i + 1);
  Json lambda = Json::array();
  for (double l : c.lambda) lambda.push_back(number_json(l));
  const auto& r = c.residuals;
  return Json{{"alpha", c.alpha},
              {"iconv", conv},
              {"vectors", matrix_json(c.vectors)},
              {"B", matrix_json(c.B)},
              {"lambda", lambda},
              {"tol", number_json(c.tol)},
              {"effective_rank", c.effective_rank},
              {"method", c.method},
              {"residuals",
               {{"max_norm_violation", number_json(r.max_norm_violation)},
                {"sum_norm_residual", number_json(r.sum_norm_residual)},
                {"min_lambda", number_json(r.min_lambda)},
                {"max_lambda_off_conv", number_json(r.max_lambda_off_conv)},
                {"min_eigenvalue", number_json(r.min_eigenvalue)},
                {"symmetry", number_json(r.symmetry)}}}};
}

GridGeometry parse_grid_spec(const std::string& spec) {
  std::vector<Axis> axes;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    double lo = 0, hi = 0;
    long long count = 0;
    char extra = 0;
    if (std::sscanf(part.c_str(), "%lf:%lf:%lld%c", &lo, &hi, &count, &extra) != 3)
      fail(ErrorCode::Config, "grid axis '" + part + "' is not lo:hi:count");
    if (!(hi > lo) || count < 2) fail(ErrorCode::Config, "grid axis '" + part + "' needs hi > lo and count >= 2");
    axes.push_back(Axis{lo, (hi - lo) / static_cast<double>(count - 1), static_cast<std::size_t>(count)});
  }
  if (axes.empty() || axes.size() > 3) fail(ErrorCode::Config, "grid needs 1 to 3 axes");
  return GridGeometry(axes);
}

std::string grid_spec(const GridGeometry& g) {
  std::string out;
  for (int d = 0; d < g.dimension(); ++d) {
    if (d) out += ',';
    out += format17(g.axis(d).origin) + ':' + format17(g.axis(d).upper()) + ':' + std::to_string(g.axis(d).count);
  }
  return out;
}

}  // namespace ehrhard
