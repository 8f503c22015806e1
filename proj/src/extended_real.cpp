#include "ehrhard/extended_real.hpp"

#include "ehrhard/errors.hpp"

namespace ehrhard {

ExtendedReal::ExtendedReal(double v) : v_(v) {
  if (std::isnan(v)) fail(ErrorCode::Domain, "NaN is not an extended real");
}

double ext_add(double a, double b) {
  if (std::isinf(a) && std::isinf(b) && a != b) return -std::numeric_limits<double>::infinity();
  return a + b;
}

ExtendedReal& ExtendedReal::operator+=(ExtendedReal o) {
  v_ = ext_add(v_, o.v_);
  return *this;
}

ExtendedReal operator+(ExtendedReal a, ExtendedReal b) { return a += b; }
ExtendedReal operator-(ExtendedReal a, ExtendedReal b) { return a += -b; }

ExtendedReal scale(double c, ExtendedReal a) {
  if (!(c > 0.0) || !std::isfinite(c)) fail(ErrorCode::InvalidArgument, "scale factor must be positive and finite");
  return ExtendedReal(c * a.value());
}

std::string ExtendedReal::to_string() const {
  if (is_pos_inf()) return "+inf";
  if (is_neg_inf()) return "-inf";
  return std::to_string(v_);
}

}  // namespace ehrhard
