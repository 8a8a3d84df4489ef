#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace gains {

/// Exact rational number on 128-bit integers.
///
/// Solver times and step sizes are kept exact so that trajectory states
/// (t, h) compare equal iff they are the same state. Every finite double is a
/// dyadic rational, so configuration values convert without loss. Arithmetic
/// that would overflow throws instead of rounding.
class Rational {
 public:
  using Int = __int128;

  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  static Rational from_double(double x);

  Int num() const { return num_; }
  Int den() const { return den_; }

  double to_double() const;
  std::string to_string() const;

  bool is_zero() const { return num_ == 0; }
  bool is_positive() const { return num_ > 0; }

  Rational operator+(const Rational& rhs) const;
  Rational operator-(const Rational& rhs) const;
  Rational operator*(const Rational& rhs) const;
  Rational operator/(const Rational& rhs) const;
  Rational operator-() const;

  bool operator==(const Rational& rhs) const { return num_ == rhs.num_ && den_ == rhs.den_; }
  std::strong_ordering operator<=>(const Rational& rhs) const;

 private:
  static Rational make(Int num, Int den);

  Int num_ = 0;
  Int den_ = 1;
};

Rational min(const Rational& a, const Rational& b);

}  // namespace gains
