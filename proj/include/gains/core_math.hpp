#pragma once

#include <Eigen/Dense>

#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace gains {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Raised when a concrete or abstract state stops being finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double x, double tol = 0.0) const {
    return x >= lo - tol && x <= hi + tol;
  }
};

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

/// Elementwise lower/upper bounds on a vector-valued quantity.
///
/// A box with lower == upper is a valid value and stands for a single
/// concrete point.
class Box {
 public:
  Box() = default;
  Box(Vector lower, Vector upper);

  static Box point(const Vector& x);
  /// l∞ ball of the given radius.
  static Box around(const Vector& center, double radius);

  Index dim() const { return lower_.size(); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  Interval operator[](Index i) const { return {lower_[i], upper_[i]}; }

  Vector center() const;
  Vector widths() const { return upper_ - lower_; }
  double total_width() const { return widths().sum(); }
  bool is_point() const { return lower_ == upper_; }

  bool contains(const Vector& x, double tol = 0.0) const;
  bool contains(const Box& other, double tol = 0.0) const;

  Box clamped(double lo, double hi) const;

  bool operator==(const Box&) const = default;

 private:
  Vector lower_;
  Vector upper_;
};

/// x ↦ coeffs·x + offset.
class AffineMap {
 public:
  AffineMap() = default;
  AffineMap(Matrix coeffs, Vector offset);

  static AffineMap identity(Index n);
  static AffineMap zero(Index rows, Index cols);

  Index rows() const { return coeffs_.rows(); }
  Index cols() const { return coeffs_.cols(); }
  const Matrix& coeffs() const { return coeffs_; }
  const Vector& offset() const { return offset_; }

  Vector apply(const Vector& x) const;
  /// Value at the center of `box`; proportional to the volume under the map.
  Vector height(const Box& box) const;

  AffineMap operator-(const AffineMap& rhs) const;
  AffineMap operator+(const AffineMap& rhs) const;
  AffineMap operator-() const;
  AffineMap row(Index i) const;

  bool operator==(const AffineMap&) const = default;

 private:
  Matrix coeffs_;
  Vector offset_;
};

/// Sound image of `input` under `map`, computed by splitting coefficient signs.
Box interval_affine(const AffineMap& map, const Box& input);

/// Lower and upper concretization of a single affine row over `input`.
Interval interval_affine_row(const Eigen::Ref<const Eigen::RowVectorXd>& coeffs,
                             double offset, const Box& input);

Box box_hull(const Box& a, const Box& b);

/// Elementwise tightest bounds of two sound boxes for the same quantity.
///
/// Sound boxes always overlap in exact arithmetic; a crossing produced by
/// rounding on (near-)degenerate inputs is resolved to the span of the two
/// crossing endpoints.
Box box_meet(const Box& a, const Box& b);

/// Bounds on ‖w/τ‖₁ over all w in `diff`.
Interval l1_interval_norm(const Box& diff, double tau);

double l1_norm(const Vector& v);

/// Shortest round-trip decimal text for a double.
std::string format_double(double x);

/// Uniform double in [lo, hi) from the top 53 bits of a 64-bit draw, so
/// streams are identical across standard libraries.
double uniform(std::mt19937_64& rng, double lo, double hi);

}  // namespace gains
