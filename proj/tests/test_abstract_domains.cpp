#include "gains/abstract_domains.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace gains;
using testing::box;
using testing::mat;
using testing::vec;

namespace {

const std::vector<AbstractMode> kModes = {AbstractMode::box(), AbstractMode::linear(ReluPolicy::AreaMin),
                                          AbstractMode::linear(ReluPolicy::AllZero),
                                          AbstractMode::linear(ReluPolicy::AllOne)};

Dynamics random_dynamics(std::mt19937_64& rng, Index n, Index hidden) {
  auto fill = [&](Index r, Index c, double s) {
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = uniform(rng, -s, s);
    return m;
  };
  auto bias = [&](Index r) {
    Vector b(r);
    for (Index i = 0; i < r; ++i) b[i] = uniform(rng, -0.3, 0.3);
    return b;
  };
  return Dynamics({Layer::concat_time_linear(fill(hidden, n + 1, 1.0), bias(hidden)), Layer::relu(hidden),
                   Layer::linear(fill(n, hidden, 0.7), bias(n))},
                  n);
}

Box random_box(std::mt19937_64& rng, Index n, double max_width) {
  Vector lo(n), hi(n);
  for (Index i = 0; i < n; ++i) {
    lo[i] = uniform(rng, -1, 1);
    hi[i] = lo[i] + uniform(rng, 0, max_width);
  }
  return Box(lo, hi);
}

}  // namespace

TEST_SUITE("abstract_domains") {
  TEST_CASE("ibp_layer examples") {
    CHECK(ibp_layer(Layer::relu(1), box({-1}, {2}), std::nullopt) == box({0}, {2}));
    CHECK(ibp_layer(Layer::relu(1), box({1}, {2}), std::nullopt) == box({1}, {2}));
    CHECK(ibp_layer(Layer::linear(mat({{1, -1}}), vec({0})), box({0, 0}, {1, 1}), std::nullopt) ==
          box({-1}, {1}));
  }

  TEST_CASE("ibp_layer appends time as an input") {
    const Layer l = Layer::concat_time_linear(mat({{1, 2}}), vec({0}));
    CHECK(ibp_layer(l, box({0}, {1}), Interval{1, 2}) == box({2}, {5}));
  }

  TEST_CASE("relu_relaxation examples") {
    const ReluRelaxation a = relu_relaxation(-1, 1, ReluPolicy::AreaMin);
    CHECK(a.lambda == 1.0);
    CHECK(a.upper_slope == 0.5);
    CHECK(a.upper_offset == 0.5);
    const ReluRelaxation b = relu_relaxation(-2, 1, ReluPolicy::AreaMin);
    CHECK(b.lambda == 0.0);
    CHECK(b.upper_slope == doctest::Approx(1.0 / 3));
    CHECK(b.upper_offset == doctest::Approx(2.0 / 3));
    const ReluRelaxation c = relu_relaxation(0.5, 2, ReluPolicy::AllZero);
    CHECK(c.lambda == 1.0);
    CHECK(c.upper_slope == 1.0);
    CHECK(c.upper_offset == 0.0);
    const ReluRelaxation d = relu_relaxation(-2, -1, ReluPolicy::AllOne);
    CHECK(d.lambda == 0.0);
    CHECK(d.upper_slope == 0.0);
    CHECK(d.upper_offset == 0.0);
    CHECK(relu_relaxation(-1, 3, ReluPolicy::AllZero).lambda == 0.0);
    CHECK(relu_relaxation(-3, 1, ReluPolicy::AllOne).lambda == 1.0);
  }

  TEST_CASE("relu_relaxation rejects empty intervals") {
    CHECK_THROWS(relu_relaxation(1, 1, ReluPolicy::AreaMin));
    CHECK_THROWS(relu_relaxation(2, 1, ReluPolicy::AreaMin));
  }

  TEST_CASE("relaxation encloses the ReLU on random unstable intervals") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 5000; ++i) {
      const double l = uniform(rng, -5, -1e-3), u = uniform(rng, 1e-3, 5);
      for (ReluPolicy p : {ReluPolicy::AreaMin, ReluPolicy::AllZero, ReluPolicy::AllOne}) {
        const ReluRelaxation r = relu_relaxation(l, u, p);
        CHECK(r.lambda >= 0.0);
        CHECK(r.lambda <= 1.0);
        const double x = uniform(rng, l, u);
        const double y = std::max(x, 0.0);
        CHECK(r.lambda * x <= y + 1e-12);
        CHECK(y <= r.upper_slope * x + r.upper_offset + 1e-12);
      }
    }
  }

  TEST_CASE("backsubstitution through an identity layer keeps the maps") {
    CompositeTransformer tr(box({-1, 0}, {1, 2}), true);
    const Index id = tr.add_layers(0, {Layer::linear(Matrix::Identity(2, 2), Vector::Zero(2))}, std::nullopt);
    const AffineMap q(mat({{2, -3}}), vec({1}));
    CHECK(tr.backsubstitute(id, q, Side::Upper) == q);
    CHECK(tr.backsubstitute(id, q, Side::Lower) == q);
  }

  TEST_CASE("backsubstitution through a ReLU uses the chord as upper line") {
    CompositeTransformer tr(box({-1}, {1}), true);
    const Index y = tr.add_relu(0);
    const AffineMap up = tr.backsubstitute(y, AffineMap(mat({{1}}), vec({0})), Side::Upper);
    CHECK(up.coeffs()(0, 0) == 0.5);
    CHECK(up.offset()[0] == 0.5);
    // negative coefficient on the upper side substitutes the lower relaxation (λ = 1 here)
    const AffineMap neg = tr.backsubstitute(y, AffineMap(mat({{-1}}), vec({0})), Side::Upper);
    CHECK(neg.coeffs()(0, 0) == -1.0);
    CHECK(neg.offset()[0] == 0.0);
  }

  TEST_CASE("concretize examples") {
    const Box x = box({-1}, {1});
    const AffineMap up(mat({{0.5}}), vec({0.5}));
    const LinearBounds lb{AffineMap(mat({{0}}), vec({0})), up, box({0}, {1})};
    CHECK(concretize(lb, x).upper()[0] == 1.0);
    const LinearBounds zero{AffineMap(mat({{0}}), vec({0.25})), AffineMap(mat({{0}}), vec({0.25})), box({0}, {1})};
    CHECK(concretize(zero, x) == box({0.25}, {0.25}));
    const AffineMap exact(mat({{2}}), vec({1}));
    const Box p = concretize(LinearBounds{exact, exact, box({0}, {10})}, box({3}, {3}));
    CHECK(p == box({7}, {7}));
  }

  TEST_CASE("zero dynamics leave the box unchanged") {
    const Dynamics zero({Layer::linear(Matrix::Zero(2, 2), Vector::Zero(2))}, 2);
    const Box b = box({-1, 0.5}, {0, 2});
    for (const auto& mode : kModes) {
      const AbstractStep s = abstract_rk_step(zero, b, 0.0, 0.5, tableau(TableauId::Dopri5), mode, 0.005);
      CHECK(s.output_box() == b);
      CHECK(s.delta.lo == 0.0);
      CHECK(s.delta.hi == 0.0);
    }
  }

  TEST_CASE("degenerate box reproduces the concrete step") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 50; ++i) {
      const Dynamics dyn = random_dynamics(rng, 3, 5);
      const Vector z = testing::sample(box({-1, -1, -1}, {1, 1, 1}), rng);
      const double t = uniform(rng, 0, 1), h = uniform(rng, 0.01, 0.5);
      const StepResult c = rk_step(dyn, z, t, h, TableauId::Dopri5);
      const double delta = error_ratio(c.error, 0.005);
      for (const auto& mode : kModes) {
        const AbstractStep s =
            abstract_rk_step(dyn, Box::point(z), t, h, tableau(TableauId::Dopri5), mode, 0.005);
        CHECK((s.output_box().lower() - c.z_hat1).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((s.output_box().upper() - c.z_hat1).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(std::abs(s.delta.lo - delta) <= 1e-12 * std::max(1.0, delta));
        CHECK(std::abs(s.delta.hi - delta) <= 1e-12 * std::max(1.0, delta));
      }
    }
  }

  TEST_CASE("decaying linear system contains the stepped endpoints") {
    const Dynamics decay({Layer::linear(mat({{-1}}), vec({0}))}, 1);
    const AbstractStep s =
        abstract_rk_step(decay, box({1}, {2}), 0.0, 0.1, tableau(TableauId::Dopri5), AbstractMode::box(), 0.005);
    for (double z : {1.0, 2.0}) {
      const double y = rk_step(decay, vec({z}), 0.0, 0.1, TableauId::Dopri5).z_hat1[0];
      CHECK(s.output_box().contains(vec({y}), 1e-12));
      CHECK(std::abs(y - std::exp(-0.1) * z) < 1e-6);
    }
  }

  TEST_CASE("every stage of a random step lies in its bounds") {
    std::mt19937_64 rng(29);
    for (int i = 0; i < 1000; ++i) {
      const Dynamics dyn = random_dynamics(rng, 2, 4);
      const Box b = random_box(rng, 2, 0.3);
      const double t = uniform(rng, 0, 1), h = uniform(rng, 0.01, 0.4);
      const AbstractMode& mode = kModes[static_cast<std::size_t>(i) % kModes.size()];
      const AbstractStep s = abstract_rk_step(dyn, b, t, h, tableau(TableauId::Dopri5), mode, 0.005);
      const Vector z = testing::sample(b, rng);
      const auto values = s.transformer->evaluate(z);
      for (std::size_t k = 0; k < values.size(); ++k) {
        REQUIRE(s.transformer->box(static_cast<Index>(k)).contains(values[k], 1e-9));
      }
      const StepResult c = rk_step(dyn, z, t, h, TableauId::Dopri5);
      CHECK(s.output_box().contains(c.z_hat1, 1e-9));
      CHECK(s.error_box().contains(c.error, 1e-9));
      CHECK(s.delta.contains(error_ratio(c.error, 0.005), 1e-9));
    }
  }

  TEST_CASE("linear mode is exact on affine dynamics") {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 50; ++i) {
      Matrix w(2, 2);
      for (Index r = 0; r < 2; ++r)
        for (Index c = 0; c < 2; ++c) w(r, c) = uniform(rng, -1, 1);
      const Dynamics dyn({Layer::linear(w, vec({0.1, -0.2}))}, 2);
      const Box b = random_box(rng, 2, 0.5);
      const double h = 0.2;
      // the step is affine: recover it column by column
      const Vector base = rk_step(dyn, Vector::Zero(2), 0.0, h, TableauId::Dopri5).z_hat1;
      Matrix m(2, 2);
      for (Index c = 0; c < 2; ++c) {
        m.col(c) = rk_step(dyn, Vector::Unit(2, c), 0.0, h, TableauId::Dopri5).z_hat1 - base;
      }
      const Box exact = interval_affine(AffineMap(m, base), b);
      const Box lin = abstract_rk_step(dyn, b, 0.0, h, tableau(TableauId::Dopri5),
                                       AbstractMode::linear(ReluPolicy::AreaMin), 0.005)
                          .output_box();
      const Box ibp =
          abstract_rk_step(dyn, b, 0.0, h, tableau(TableauId::Dopri5), AbstractMode::box(), 0.005).output_box();
      CHECK((lin.lower() - exact.lower()).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK((lin.upper() - exact.upper()).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK(ibp.contains(lin, 1e-12));
    }
  }

  TEST_CASE("combined_bounds examples") {
    const Box a = box({0}, {3});
    CHECK(combined_bounds({a}) == a);
    CHECK(combined_bounds({a, box({1}, {4})}) == box({1}, {3}));
    CHECK_THROWS(combined_bounds({}));
  }

  TEST_CASE("combined bounds are contained in every method box") {
    std::mt19937_64 rng(37);
    for (int i = 0; i < 100; ++i) {
      const Dynamics dyn = random_dynamics(rng, 2, 4);
      const Box b = random_box(rng, 2, 0.5);
      std::vector<Box> boxes;
      for (const auto& mode : kModes) {
        boxes.push_back(abstract_rk_step(dyn, b, 0.0, 0.2, tableau(TableauId::Dopri5), mode, 0.005).output_box());
      }
      const Box c = combined_bounds(boxes);
      for (const Box& x : boxes) {
        CHECK(x.contains(c));
        for (Index k = 0; k < c.dim(); ++k) CHECK(c.widths()[k] <= x.widths()[k]);
      }
    }
  }
}
