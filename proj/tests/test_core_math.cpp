#include "gains/core_math.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace gains;
using testing::box;
using testing::mat;
using testing::vec;

TEST_SUITE("core_math") {
  TEST_CASE("interval_affine splits coefficient signs") {
    const Box out = interval_affine(AffineMap(mat({{1, -1}}), vec({0})), box({0, 0}, {1, 1}));
    CHECK(out.lower()[0] == -1.0);
    CHECK(out.upper()[0] == 1.0);
  }

  TEST_CASE("interval_affine with identity keeps the box") {
    const Box b = box({-1, 2, 0.5}, {3, 2, 0.75});
    CHECK(interval_affine(AffineMap::identity(3), b) == b);
  }

  TEST_CASE("interval_affine matches corner enumeration") {
    const AffineMap m(mat({{2, 3}}), vec({1}));
    const Box in = box({0, -1}, {1, 0});
    double lo = 1e300, hi = -1e300;
    for (double x : {0.0, 1.0}) {
      for (double y : {-1.0, 0.0}) {
        const double v = m.apply(vec({x, y}))[0];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    const Box out = interval_affine(m, in);
    CHECK(out.lower()[0] == lo);
    CHECK(out.upper()[0] == hi);
    CHECK(lo == -2.0);
    CHECK(hi == 3.0);
  }

  TEST_CASE("interval_affine rejects mismatched dims") {
    CHECK_THROWS_AS(interval_affine(AffineMap::identity(2), box({0}, {1})), DimensionError);
  }

  TEST_CASE("interval_affine contains every sampled image") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10000; ++trial) {
      const Index r = 1 + static_cast<Index>(rng() % 4), c = 1 + static_cast<Index>(rng() % 4);
      Matrix w(r, c);
      Vector b(r), lo(c), hi(c);
      for (Index i = 0; i < r; ++i) {
        b[i] = uniform(rng, -2, 2);
        for (Index j = 0; j < c; ++j) w(i, j) = uniform(rng, -3, 3);
      }
      for (Index j = 0; j < c; ++j) {
        const double a = uniform(rng, -2, 2), d = uniform(rng, -2, 2);
        lo[j] = std::min(a, d);
        hi[j] = std::max(a, d);
      }
      const Box in(lo, hi);
      const AffineMap m(w, b);
      const Vector x = testing::sample(in, rng);
      REQUIRE(interval_affine(m, in).contains(m.apply(x), 1e-12));
    }
  }

  TEST_CASE("box_hull examples") {
    CHECK(box_hull(box({0}, {1}), box({0}, {1})) == box({0}, {1}));
    CHECK(box_hull(box({0}, {1}), box({2}, {3})) == box({0}, {3}));
    CHECK(box_hull(box({-1}, {0}), box({-2}, {2})) == box({-2}, {2}));
  }

  TEST_CASE("box_hull is commutative, associative, idempotent and contains both") {
    std::mt19937_64 rng(3);
    auto rand_box = [&] {
      Vector lo(3), hi(3);
      for (Index i = 0; i < 3; ++i) {
        const double a = uniform(rng, -5, 5), b = uniform(rng, -5, 5);
        lo[i] = std::min(a, b);
        hi[i] = std::max(a, b);
      }
      return Box(lo, hi);
    };
    for (int i = 0; i < 500; ++i) {
      const Box a = rand_box(), b = rand_box(), c = rand_box();
      CHECK(box_hull(a, b) == box_hull(b, a));
      CHECK(box_hull(box_hull(a, b), c) == box_hull(a, box_hull(b, c)));
      CHECK(box_hull(a, a) == a);
      CHECK(box_hull(a, b).contains(a));
      CHECK(box_hull(a, b).contains(b));
    }
  }

  TEST_CASE("box_hull rejects mismatched dims") {
    CHECK_THROWS_AS(box_hull(box({0}, {1}), box({0, 0}, {1, 1})), DimensionError);
  }

  TEST_CASE("l1_interval_norm examples") {
    const Interval z = l1_interval_norm(box({0}, {0}), 1.0);
    CHECK(z.lo == 0.0);
    CHECK(z.hi == 0.0);
    const Interval a = l1_interval_norm(box({-1}, {2}), 1.0);
    CHECK(a.lo == 0.0);
    CHECK(a.hi == 2.0);
    // |[1,2]| + |[-3,-1]| = [2,5], divided by 0.5
    const Interval b = l1_interval_norm(box({1, -3}, {2, -1}), 0.5);
    CHECK(b.lo == doctest::Approx(4.0));
    CHECK(b.hi == doctest::Approx(10.0));
  }

  TEST_CASE("l1_interval_norm contains sampled norms") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
      Vector lo(3), hi(3);
      for (Index i = 0; i < 3; ++i) {
        const double a = uniform(rng, -2, 2), b = uniform(rng, -2, 2);
        lo[i] = std::min(a, b);
        hi[i] = std::max(a, b);
      }
      const Box d(lo, hi);
      const double tau = uniform(rng, 0.01, 2);
      const Interval n = l1_interval_norm(d, tau);
      const Vector w = testing::sample(d, rng);
      CHECK(n.contains(l1_norm(w) / tau, 1e-12));
    }
  }

  TEST_CASE("l1_interval_norm requires positive tau") {
    CHECK_THROWS(l1_interval_norm(box({0}, {1}), 0.0));
  }

  TEST_CASE("box invariants are enforced") {
    CHECK_THROWS(Box(vec({1}), vec({0})));
    CHECK_THROWS(Box(vec({0, 0}), vec({1})));
    CHECK_THROWS(Box::point(vec({std::nan("")})));
  }

  TEST_CASE("box_meet takes the tightest bounds") {
    CHECK(box_meet(box({0}, {3}), box({1}, {4})) == box({1}, {3}));
  }

  TEST_CASE("format_double round-trips") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678}) {
      CHECK(std::stod(format_double(x)) == x);
    }
  }
}
