#include "gains/rational.hpp"

#include "gains/core_math.hpp"

#include <cmath>

namespace gains {
namespace {

using Int = Rational::Int;
using UInt = unsigned __int128;

UInt uabs(Int x) { return x < 0 ? UInt(0) - UInt(x) : UInt(x); }

Int gcd(Int a, Int b) {
  UInt x = uabs(a);
  UInt y = uabs(b);
  while (y != 0) {
    UInt r = x % y;
    x = y;
    y = r;
  }
  return static_cast<Int>(x);
}

Int checked_mul(Int a, Int b) {
  Int r;
  if (__builtin_mul_overflow(a, b, &r)) throw Error("exact step arithmetic overflowed");
  return r;
}

Int checked_add(Int a, Int b) {
  Int r;
  if (__builtin_add_overflow(a, b, &r)) throw Error("exact step arithmetic overflowed");
  return r;
}

std::string int_to_string(Int v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  UInt u = uabs(v);
  std::string s;
  while (u != 0) {
    s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(u % 10)));
    u /= 10;
  }
  return neg ? "-" + s : s;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) { *this = make(num, den); }

Rational Rational::make(Int num, Int den) {
  if (den == 0) throw Error("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const Int g = gcd(num, den);
  Rational r;
  r.num_ = g == 0 ? 0 : num / g;
  r.den_ = g == 0 ? 1 : den / g;
  return r;
}

Rational Rational::from_double(double x) {
  if (!std::isfinite(x)) throw Error("cannot represent non-finite value exactly");
  if (x == 0.0) return Rational();
  int exp = 0;
  const double frac = std::frexp(x, &exp);
  // x = mant * 2^(exp - 53) with |mant| < 2^53
  const auto mant = static_cast<std::int64_t>(std::ldexp(frac, 53));
  int shift = exp - 53;
  Int num = mant;
  Int den = 1;
  // strip trailing zero bits first so the exponent range we accept is wider
  while (shift < 0 && (num & 1) == 0) {
    num >>= 1;
    ++shift;
  }
  if (shift >= 0) {
    if (shift > 70) throw Error("value too large for exact step arithmetic");
    num = checked_mul(num, Int(1) << shift);
  } else {
    if (-shift > 120) throw Error("value too small for exact step arithmetic");
    den = Int(1) << (-shift);
  }
  return make(num, den);
}

double Rational::to_double() const {
  return static_cast<double>(static_cast<long double>(num_) / static_cast<long double>(den_));
}

std::string Rational::to_string() const {
  if (den_ == 1) return int_to_string(num_);
  return int_to_string(num_) + "/" + int_to_string(den_);
}

Rational Rational::operator+(const Rational& rhs) const {
  const Int g = gcd(den_, rhs.den_);
  const Int lhs_scale = rhs.den_ / g;
  const Int rhs_scale = den_ / g;
  return make(checked_add(checked_mul(num_, lhs_scale), checked_mul(rhs.num_, rhs_scale)),
              checked_mul(den_, lhs_scale));
}

Rational Rational::operator-(const Rational& rhs) const { return *this + (-rhs); }

Rational Rational::operator*(const Rational& rhs) const {
  const Int g1 = gcd(num_, rhs.den_);
  const Int g2 = gcd(rhs.num_, den_);
  const Int a = g1 == 0 ? num_ : num_ / g1;
  const Int d = g1 == 0 ? rhs.den_ : rhs.den_ / g1;
  const Int c = g2 == 0 ? rhs.num_ : rhs.num_ / g2;
  const Int b = g2 == 0 ? den_ : den_ / g2;
  return make(checked_mul(a, c), checked_mul(b, d));
}

Rational Rational::operator/(const Rational& rhs) const {
  if (rhs.num_ == 0) throw Error("division by zero in exact step arithmetic");
  Rational inv;
  inv.num_ = rhs.den_;
  inv.den_ = rhs.num_;
  if (inv.den_ < 0) {
    inv.num_ = -inv.num_;
    inv.den_ = -inv.den_;
  }
  return *this * inv;
}

Rational Rational::operator-() const {
  Rational r = *this;
  r.num_ = -r.num_;
  return r;
}

std::strong_ordering Rational::operator<=>(const Rational& rhs) const {
  const Int lhs_v = checked_mul(num_, rhs.den_);
  const Int rhs_v = checked_mul(rhs.num_, den_);
  if (lhs_v < rhs_v) return std::strong_ordering::less;
  if (lhs_v > rhs_v) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

Rational min(const Rational& a, const Rational& b) { return b < a ? b : a; }

}  // namespace gains
