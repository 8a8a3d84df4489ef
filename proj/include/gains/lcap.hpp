#pragma once

#include "gains/abstract_domains.hpp"
#include "gains/core_math.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace gains {

/// m scalar affine bounds (1-row maps) on the same quantity over `box`.
struct ConstraintSet {
  std::vector<AffineMap> constraints;
  Box box;

  Index dim() const { return box.dim(); }
  std::size_t size() const { return constraints.size(); }
  void validate() const;
};

/// Single affine upper (or lower) bound on the max (min) of the set, by a
/// left fold of u* + relaxed ReLU(u_j - u*).
AffineMap curls_merge(const ConstraintSet& set, Side side = Side::Upper);

/// Row-wise merge of multi-row maps over a common box.
AffineMap curls_merge_rows(const std::vector<AffineMap>& maps, const Box& box, Side side);

constexpr Index kOracleDimCap = 12;

/// Minimum-volume sound affine upper bound, solved exactly over the box corners.
AffineMap exact_oracle(const ConstraintSet& set, Index dim_cap = kOracleDimCap);

struct SoundnessReport {
  bool sound = true;
  std::optional<Vector> witness;  // corner where a constraint exceeds the merged bound
  double worst_gap = 0.0;         // max over checked points of u_j - merged, > 0 when unsound
  std::int64_t points = 0;
};

/// Exhaustive over all corners for d <= 20, otherwise `samples` random corners.
SoundnessReport soundness_check(const AffineMap& merged, const ConstraintSet& set,
                                std::uint64_t seed = 0, std::int64_t samples = 100000,
                                double tol = 1e-9);

double lcap_g1(int d);
double lcap_g2(int d);

struct LcapInstance {
  ConstraintSet set;
  AffineMap relation;  // ground truth every constraint dominates
  std::int64_t samples_used = 0;
  double min_mean_cosine = 0.0;   // smallest per-iteration mean similarity accepted
  double mean_pair_cosine = 0.0;  // 1 when m == 1
};

class GenerationBudgetError : public Error {
 public:
  using Error::Error;
};

LcapInstance generate_lcap_instance(int d, int m, std::uint64_t seed,
                                    std::int64_t budget = 35000);

/// Cosine similarity over the first d entries of two (d+1)-vectors.
double lcap_cosine(const Vector& a, const Vector& b);

/// Ratio of mean heights above `baseline` (0 when absent) at the box center; 0/0 is 1.
double volume_ratio(const AffineMap& a, const AffineMap& b, const Box& box,
                    const std::optional<AffineMap>& baseline = std::nullopt);

}  // namespace gains
