#include "gains/core_math.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace gains {

bool all_finite(const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) return false;
  }
  return true;
}

bool all_finite(const Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) return false;
    }
  }
  return true;
}

Box::Box(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) {
    throw DimensionError("box bounds have different lengths: " + std::to_string(lower_.size()) +
                         " vs " + std::to_string(upper_.size()));
  }
  if (!all_finite(lower_) || !all_finite(upper_)) {
    throw DivergenceError("box bounds are not finite");
  }
  for (Index i = 0; i < lower_.size(); ++i) {
    if (lower_[i] > upper_[i]) {
      throw Error("box lower bound exceeds upper bound at coordinate " + std::to_string(i));
    }
  }
}

Box Box::point(const Vector& x) { return Box(x, x); }

Box Box::around(const Vector& center, double radius) {
  if (!(radius >= 0.0)) throw Error("box radius must be non-negative");
  Vector lo = center.array() - radius;
  Vector hi = center.array() + radius;
  return Box(std::move(lo), std::move(hi));
}

Vector Box::center() const {
  Vector c(dim());
  for (Index i = 0; i < dim(); ++i) {
    // exact for points, keeps degenerate boxes degenerate
    c[i] = lower_[i] == upper_[i] ? lower_[i] : 0.5 * (lower_[i] + upper_[i]);
  }
  return c;
}

bool Box::contains(const Vector& x, double tol) const {
  if (x.size() != dim()) throw DimensionError("point dimension does not match box");
  for (Index i = 0; i < dim(); ++i) {
    if (!(x[i] >= lower_[i] - tol && x[i] <= upper_[i] + tol)) return false;
  }
  return true;
}

bool Box::contains(const Box& other, double tol) const {
  if (other.dim() != dim()) throw DimensionError("box dimensions differ");
  for (Index i = 0; i < dim(); ++i) {
    if (other.lower_[i] < lower_[i] - tol || other.upper_[i] > upper_[i] + tol) return false;
  }
  return true;
}

Box Box::clamped(double lo, double hi) const {
  Vector l = lower_.cwiseMax(lo).cwiseMin(hi);
  Vector u = upper_.cwiseMax(lo).cwiseMin(hi);
  return Box(std::move(l), std::move(u));
}

AffineMap::AffineMap(Matrix coeffs, Vector offset)
    : coeffs_(std::move(coeffs)), offset_(std::move(offset)) {
  if (offset_.size() != coeffs_.rows()) {
    throw DimensionError("affine map offset length " + std::to_string(offset_.size()) +
                         " does not match " + std::to_string(coeffs_.rows()) + " rows");
  }
}

AffineMap AffineMap::identity(Index n) {
  return AffineMap(Matrix::Identity(n, n), Vector::Zero(n));
}

AffineMap AffineMap::zero(Index rows, Index cols) {
  return AffineMap(Matrix::Zero(rows, cols), Vector::Zero(rows));
}

Vector AffineMap::apply(const Vector& x) const {
  if (x.size() != cols()) throw DimensionError("affine map input dimension mismatch");
  Vector y(rows());
  for (Index r = 0; r < rows(); ++r) {
    double acc = 0.0;
    for (Index c = 0; c < cols(); ++c) acc += coeffs_(r, c) * x[c];
    y[r] = acc + offset_[r];
  }
  return y;
}

Vector AffineMap::height(const Box& box) const { return apply(box.center()); }

AffineMap AffineMap::operator-(const AffineMap& rhs) const {
  if (rhs.rows() != rows() || rhs.cols() != cols()) throw DimensionError("affine map shapes differ");
  return AffineMap(coeffs_ - rhs.coeffs_, offset_ - rhs.offset_);
}

AffineMap AffineMap::operator+(const AffineMap& rhs) const {
  if (rhs.rows() != rows() || rhs.cols() != cols()) throw DimensionError("affine map shapes differ");
  return AffineMap(coeffs_ + rhs.coeffs_, offset_ + rhs.offset_);
}

AffineMap AffineMap::operator-() const { return AffineMap(-coeffs_, -offset_); }

AffineMap AffineMap::row(Index i) const {
  return AffineMap(coeffs_.row(i), offset_.segment(i, 1));
}

Interval interval_affine_row(const Eigen::Ref<const Eigen::RowVectorXd>& coeffs, double offset,
                             const Box& input) {
  if (coeffs.size() != input.dim()) throw DimensionError("affine row does not match box dimension");
  double lo = 0.0;
  double hi = 0.0;
  const Vector& l = input.lower();
  const Vector& u = input.upper();
  for (Index c = 0; c < coeffs.size(); ++c) {
    const double w = coeffs[c];
    if (w >= 0.0) {
      lo += w * l[c];
      hi += w * u[c];
    } else {
      lo += w * u[c];
      hi += w * l[c];
    }
  }
  return {lo + offset, hi + offset};
}

Box interval_affine(const AffineMap& map, const Box& input) {
  if (map.cols() != input.dim()) {
    throw DimensionError("affine map expects " + std::to_string(map.cols()) +
                         " inputs, box has " + std::to_string(input.dim()));
  }
  Vector lo(map.rows());
  Vector hi(map.rows());
  for (Index r = 0; r < map.rows(); ++r) {
    const Interval iv = interval_affine_row(map.coeffs().row(r), map.offset()[r], input);
    lo[r] = iv.lo;
    hi[r] = iv.hi;
  }
  return Box(std::move(lo), std::move(hi));
}

Box box_hull(const Box& a, const Box& b) {
  if (a.dim() != b.dim()) throw DimensionError("box_hull: dimensions differ");
  return Box(a.lower().cwiseMin(b.lower()), a.upper().cwiseMax(b.upper()));
}

Box box_meet(const Box& a, const Box& b) {
  if (a.dim() != b.dim()) throw DimensionError("box_meet: dimensions differ");
  Vector lo = a.lower().cwiseMax(b.lower());
  Vector hi = a.upper().cwiseMin(b.upper());
  for (Index i = 0; i < lo.size(); ++i) {
    if (lo[i] > hi[i]) std::swap(lo[i], hi[i]);
  }
  return Box(std::move(lo), std::move(hi));
}

Interval l1_interval_norm(const Box& diff, double tau) {
  if (!(tau > 0.0)) throw Error("l1_interval_norm: tau must be positive");
  double lo = 0.0;
  double hi = 0.0;
  for (Index i = 0; i < diff.dim(); ++i) {
    const double l = diff.lower()[i];
    const double u = diff.upper()[i];
    const double abs_hi = std::max(std::abs(l), std::abs(u));
    const double abs_lo = (l <= 0.0 && u >= 0.0) ? 0.0 : std::min(std::abs(l), std::abs(u));
    lo += abs_lo;
    hi += abs_hi;
  }
  return {lo / tau, hi / tau};
}

double l1_norm(const Vector& v) {
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) acc += std::abs(v[i]);
  return acc;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

}  // namespace gains
