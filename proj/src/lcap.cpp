#include "gains/lcap.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>

namespace gains {

void ConstraintSet::validate() const {
  if (constraints.empty()) throw Error("constraint set is empty");
  for (const auto& c : constraints) {
    if (c.rows() != 1) throw DimensionError("constraints must be scalar affine maps");
    if (c.cols() != box.dim()) {
      throw DimensionError("constraint has " + std::to_string(c.cols()) + " inputs, box has " +
                           std::to_string(box.dim()));
    }
  }
}

namespace {

AffineMap merge_upper(const std::vector<AffineMap>& maps, const Box& box) {
  AffineMap cur = maps.front();
  for (std::size_t j = 1; j < maps.size(); ++j) {
    const AffineMap w = maps[j] - cur;
    const Interval iv = interval_affine_row(w.coeffs().row(0), w.offset()[0], box);
    if (iv.hi <= 0.0) continue;
    if (iv.lo >= 0.0) {
      cur = maps[j];
      continue;
    }
    const ReluRelaxation r = relu_relaxation(iv.lo, iv.hi, ReluPolicy::AreaMin);
    Matrix coeffs = cur.coeffs() + r.upper_slope * w.coeffs();
    Vector offset = cur.offset() + r.upper_slope * w.offset();
    offset[0] += r.upper_offset;
    cur = AffineMap(std::move(coeffs), std::move(offset));
  }
  return cur;
}

}  // namespace

AffineMap curls_merge(const ConstraintSet& set, Side side) {
  set.validate();
  if (side == Side::Upper) return merge_upper(set.constraints, set.box);
  std::vector<AffineMap> neg;
  neg.reserve(set.size());
  for (const auto& c : set.constraints) neg.push_back(-c);
  return -merge_upper(neg, set.box);
}

AffineMap curls_merge_rows(const std::vector<AffineMap>& maps, const Box& box, Side side) {
  if (maps.empty()) throw Error("curls_merge_rows: no maps");
  if (maps.size() == 1) return maps.front();
  const Index rows = maps.front().rows();
  Matrix coeffs(rows, box.dim());
  Vector offset(rows);
  for (Index r = 0; r < rows; ++r) {
    ConstraintSet set{{}, box};
    for (const auto& m : maps) set.constraints.push_back(m.row(r));
    const AffineMap merged = curls_merge(set, side);
    coeffs.row(r) = merged.coeffs().row(0);
    offset[r] = merged.offset()[0];
  }
  return AffineMap(std::move(coeffs), std::move(offset));
}

namespace {

// Corner `mask` of the box restricted to the listed free coordinates.
Vector corner(const Box& box, const std::vector<Index>& free, std::uint64_t mask) {
  Vector v = box.lower();
  for (std::size_t k = 0; k < free.size(); ++k) {
    if (mask >> k & 1U) v[free[k]] = box.upper()[free[k]];
  }
  return v;
}

double max_value(const ConstraintSet& set, const Vector& v) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : set.constraints) best = std::max(best, c.apply(v)[0]);
  return best;
}

}  // namespace

// Dual of   min a·½ + c  s.t.  a·ζ_v + c ≥ M(v)  for every corner ζ_v ∈ {0,1}^D:
//   max Σ λ_v M(v)  s.t.  Σ λ_v = 1,  Σ λ_v ζ_v = ½,  λ ≥ 0,
// solved with a revised simplex. The optimal multipliers are the primal (c, a).
AffineMap exact_oracle(const ConstraintSet& set, Index dim_cap) {
  set.validate();
  if (set.dim() > dim_cap) {
    throw Error("exact_oracle supports d <= " + std::to_string(dim_cap) + ", got d=" +
                std::to_string(set.dim()));
  }
  if (set.size() == 1) return set.constraints.front();

  const Box& box = set.box;
  std::vector<Index> free;
  for (Index i = 0; i < box.dim(); ++i) {
    if (box.upper()[i] > box.lower()[i]) free.push_back(i);
  }
  const Index D = static_cast<Index>(free.size());
  const std::uint64_t corners = std::uint64_t(1) << D;

  std::vector<double> M(corners);
  double scale = 1.0;
  for (std::uint64_t v = 0; v < corners; ++v) {
    M[v] = max_value(set, corner(box, free, v));
    scale = std::max(scale, std::abs(M[v]));
  }
  const double eps = 1e-12 * scale;

  auto column = [D](std::uint64_t v) {
    Vector col(D + 1);
    col[0] = 1.0;
    for (Index k = 0; k < D; ++k) col[k + 1] = (v >> k & 1U) ? 1.0 : 0.0;
    return col;
  };

  // chain basis 0, e1, e1+e2, ..., all ones; feasible with weight ½ at both ends
  std::vector<std::uint64_t> basis(D + 1);
  for (Index k = 0; k <= D; ++k) basis[k] = (std::uint64_t(1) << k) - 1;
  Vector x = Vector::Zero(D + 1);
  x[0] = 0.5;
  x[D] += 0.5;

  Vector y;
  int degenerate_run = 0;
  const int max_iter = 200000;
  for (int iter = 0;; ++iter) {
    if (iter > max_iter) throw Error("exact_oracle: simplex did not converge");
    Matrix B(D + 1, D + 1);
    Vector cb(D + 1);
    for (Index k = 0; k <= D; ++k) {
      B.col(k) = column(basis[k]);
      cb[k] = M[basis[k]];
    }
    Eigen::PartialPivLU<Matrix> lu(B);
    y = lu.transpose().solve(cb);

    const bool bland = degenerate_run > 50;
    std::uint64_t enter = corners;
    double best = eps;
    for (std::uint64_t v = 0; v < corners; ++v) {
      double dot = y[0];
      for (Index k = 0; k < D; ++k) {
        if (v >> k & 1U) dot += y[k + 1];
      }
      const double rc = M[v] - dot;
      if (rc > best) {
        enter = v;
        if (bland) break;
        best = rc;
      }
    }
    if (enter == corners) break;

    const Vector d = lu.solve(column(enter));
    Index leave = -1;
    double theta = std::numeric_limits<double>::infinity();
    for (Index k = 0; k <= D; ++k) {
      if (d[k] <= 1e-12) continue;
      const double ratio = std::max(x[k], 0.0) / d[k];
      if (ratio < theta - 1e-15 || (ratio <= theta + 1e-15 && leave >= 0 && basis[k] < basis[leave])) {
        theta = ratio;
        leave = k;
      }
    }
    if (leave < 0) throw Error("exact_oracle: unbounded simplex direction");
    degenerate_run = theta <= 1e-15 ? degenerate_run + 1 : 0;
    x -= theta * d;
    x[leave] = theta;
    basis[leave] = enter;
  }

  Matrix a = Matrix::Zero(1, box.dim());
  double c = y[0];
  for (Index k = 0; k < D; ++k) {
    const Index i = free[k];
    a(0, i) = y[k + 1] / (box.upper()[i] - box.lower()[i]);
  }
  for (Index i = 0; i < box.dim(); ++i) c -= a(0, i) * box.lower()[i];
  AffineMap out(a, Vector::Constant(1, c));

  // rounding in the change of coordinates can leave tiny violations
  double gap = 0.0;
  for (std::uint64_t v = 0; v < corners; ++v) {
    gap = std::max(gap, M[v] - out.apply(corner(box, free, v))[0]);
  }
  if (gap > 0.0) out = AffineMap(a, Vector::Constant(1, c + gap));
  return out;
}

SoundnessReport soundness_check(const AffineMap& merged, const ConstraintSet& set,
                                std::uint64_t seed, std::int64_t samples, double tol) {
  set.validate();
  if (merged.rows() != 1 || merged.cols() != set.dim()) {
    throw DimensionError("merged bound does not match the constraint set");
  }
  const Index d = set.dim();
  std::vector<Index> all(d);
  for (Index i = 0; i < d; ++i) all[i] = i;
  SoundnessReport rep;
  rep.worst_gap = -std::numeric_limits<double>::infinity();
  auto check = [&](const Vector& v) {
    const double m = merged.apply(v)[0];
    for (const auto& c : set.constraints) {
      const double val = c.apply(v)[0];
      const double gap = val - m;
      if (gap > rep.worst_gap) rep.worst_gap = gap;
      if (gap > tol * (1.0 + std::abs(val)) && rep.sound) {
        rep.sound = false;
        rep.witness = v;
      }
    }
    ++rep.points;
  };
  if (d <= 20) {
    const std::uint64_t corners = std::uint64_t(1) << d;
    for (std::uint64_t v = 0; v < corners; ++v) check(corner(set.box, all, v));
  } else {
    std::mt19937_64 rng(seed);
    for (std::int64_t s = 0; s < samples; ++s) {
      Vector v(d);
      for (Index i = 0; i < d; ++i) v[i] = (rng() & 1U) ? set.box.upper()[i] : set.box.lower()[i];
      check(v);
    }
  }
  return rep;
}

double lcap_g1(int d) {
  const double r = std::min(1.0, 20.0 / (d + 1));
  return 5.0 * r * r;
}

double lcap_g2(int d) {
  constexpr double beta = 3.0;
  return beta * std::min(1.0, 5.0 / (d + 1) * std::ceil((d + 1) / 50.0));
}

double lcap_cosine(const Vector& a, const Vector& b) {
  const Index d = a.size() - 1;
  const double na = a.head(d).norm();
  const double nb = b.head(d).norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.head(d).dot(b.head(d)) / (na * nb);
}

LcapInstance generate_lcap_instance(int d, int m, std::uint64_t seed, std::int64_t budget) {
  if (d < 1) throw Error("generate_lcap_instance: d must be >= 1");
  if (m < 1) throw Error("generate_lcap_instance: m must be >= 1");
  constexpr double beta = 3.0;
  const double g1 = lcap_g1(d);
  const double g2 = lcap_g2(d);
  std::mt19937_64 rng(seed);
  std::int64_t used = 0;

  auto draw = [&](double half) {
    Vector v(d + 1);
    for (int i = 0; i <= d; ++i) v[i] = uniform(rng, -half, half);
    return v;
  };
  auto spend = [&] {
    if (++used > budget) {
      throw GenerationBudgetError("LCAP generation exhausted its budget of " +
                                  std::to_string(budget) + " samples (d=" + std::to_string(d) +
                                  ", m=" + std::to_string(m) + ", seed=" + std::to_string(seed) + ")");
    }
  };

  for (;;) {
    Vector lo(d);
    Vector hi(d);
    for (int i = 0; i < d; ++i) {
      const double z1 = uniform(rng, -g1, g1);
      const double z2 = uniform(rng, -g1, g1);
      lo[i] = std::min(z1, z2);
      hi[i] = std::max(z1, z2);
    }
    const Box box(lo, hi);
    const Vector a = draw(beta / 2);

    // raise the bias until g_w ≥ g_a on the whole box
    auto lift = [&](Vector w) {
      double low = w[d] - a[d];
      for (int i = 0; i < d; ++i) {
        const double diff = w[i] - a[i];
        low += std::min(diff * lo[i], diff * hi[i]);
      }
      if (low < 0.0) w[d] -= low;
      return w;
    };

    Vector w0;
    for (;;) {
      spend();
      w0 = lift(draw(beta));
      if (std::abs(w0[d]) <= 2 * beta) break;
    }

    std::vector<Vector> U;
    double min_mean = 1.0;
    while (static_cast<int>(U.size()) < m) {
      spend();
      const Vector w = lift(w0 + draw(g2));
      if (std::abs(w[d]) > 2 * beta) continue;
      if (!U.empty()) {
        double mean = 0.0;
        for (const auto& u : U) mean += lcap_cosine(w, u);
        mean /= static_cast<double>(U.size());
        if (mean < 0.975) continue;
        min_mean = std::min(min_mean, mean);
      }
      U.push_back(w);
    }

    double pair_sum = 0.0;
    std::int64_t pairs = 0;
    for (int i = 0; i < m; ++i) {
      for (int k = i + 1; k < m; ++k) {
        pair_sum += lcap_cosine(U[i], U[k]);
        ++pairs;
      }
    }
    const double mean_pair = pairs == 0 ? 1.0 : pair_sum / static_cast<double>(pairs);
    if (pairs > 0 && mean_pair > 0.99) continue;

    LcapInstance inst;
    inst.set.box = box;
    for (const auto& w : U) {
      inst.set.constraints.emplace_back(w.head(d).transpose(), w.tail(1));
    }
    inst.relation = AffineMap(a.head(d).transpose(), a.tail(1));
    inst.samples_used = used;
    inst.min_mean_cosine = min_mean;
    inst.mean_pair_cosine = mean_pair;
    if (pairs > 0 && !(mean_pair >= 0.975 - 1e-12)) {
      throw Error("generated LCAP set violates the lower similarity bound");
    }
    return inst;
  }
}

double volume_ratio(const AffineMap& a, const AffineMap& b, const Box& box,
                    const std::optional<AffineMap>& baseline) {
  double ha = a.height(box)[0];
  double hb = b.height(box)[0];
  if (baseline) {
    const double h0 = baseline->height(box)[0];
    ha -= h0;
    hb -= h0;
  }
  if (ha == hb) return 1.0;
  if (hb == 0.0) return std::numeric_limits<double>::infinity();
  return ha / hb;
}

}  // namespace gains
