#pragma once

#include <cmath>
#include <limits>
#include <string>

namespace ehrhard {

// Element of [-inf, +inf]; the sum of opposite infinities is -inf.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  ExtendedReal(double v);  // NOLINT: implicit by design

  static ExtendedReal pos_inf() { return ExtendedReal(std::numeric_limits<double>::infinity()); }
  static ExtendedReal neg_inf() { return ExtendedReal(-std::numeric_limits<double>::infinity()); }

  double value() const { return v_; }
  bool is_finite() const { return std::isfinite(v_); }
  bool is_pos_inf() const { return v_ == std::numeric_limits<double>::infinity(); }
  bool is_neg_inf() const { return v_ == -std::numeric_limits<double>::infinity(); }

  ExtendedReal operator-() const { return ExtendedReal(-v_); }
  ExtendedReal& operator+=(ExtendedReal o);
  ExtendedReal& operator-=(ExtendedReal o) { return *this += -o; }

  std::string to_string() const;

 private:
  double v_ = 0.0;
};

ExtendedReal operator+(ExtendedReal a, ExtendedReal b);
ExtendedReal operator-(ExtendedReal a, ExtendedReal b);
// Scaling by a strictly positive finite factor.
ExtendedReal scale(double c, ExtendedReal a);

inline bool operator==(ExtendedReal a, ExtendedReal b) { return a.value() == b.value(); }
inline bool operator<(ExtendedReal a, ExtendedReal b) { return a.value() < b.value(); }
inline bool operator<=(ExtendedReal a, ExtendedReal b) { return a.value() <= b.value(); }
inline bool operator>(ExtendedReal a, ExtendedReal b) { return a.value() > b.value(); }
inline bool operator>=(ExtendedReal a, ExtendedReal b) { return a.value() >= b.value(); }

// Raw-double form of the same convention.
double ext_add(double a, double b);

}  // namespace ehrhard
