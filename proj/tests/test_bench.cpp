#include "gains/bench.hpp"
#include "gains/lcap.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <sstream>

using namespace gains;

TEST_SUITE("bench") {
  TEST_CASE("dyadic rounding keeps the leading bits") {
    CHECK(dyadic_round(0.5) == 0.5);
    CHECK(dyadic_round(0.1, 4) == 0.1015625);
    CHECK(dyadic_round(0.0) == 0.0);
    const double x = dyadic_round(0.123456789);
    CHECK(std::abs(x - 0.123456789) <= 0.123456789 * std::ldexp(1.0, -24));
    CHECK(Rational::from_double(x).to_double() == x);
  }

  TEST_CASE("comparison ODE at the origin is zero") {
    CHECK(comparison_ode(1.3, testing::vec({0}))[0] == 0.0);
    CHECK(comparison_ode(0.0, testing::vec({1}))[0] == doctest::Approx(std::cos(0.8)));
  }

  TEST_CASE("small comparison run: looser tolerances take fewer steps") {
    CasVsAsOptions o;
    o.states = 20;
    o.tolerances = {1e-5, 1e-2};
    const auto rows = cas_vs_as(o);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
      CHECK(r.failures == 0);
      CHECK(r.cas_steps <= 1.1 * o.alpha * r.as_steps);
    }
    CHECK(rows[1].cas_steps < rows[0].cas_steps);
    CHECK(rows[1].as_steps < rows[0].as_steps);
    CHECK(rows[0].cas_error < rows[1].cas_error);
  }

  TEST_CASE("comparison CSV layout") {
    std::ostringstream out;
    write_cas_vs_as(out, {CasVsAsRow{0.01, 6.5, 1e-3, 4.25, 0.02, 0}});
    CHECK(out.str() ==
          "tau,cas_mean_steps,cas_mean_error,as_mean_steps,as_mean_error,failures\n"
          "0.01,6.5,0.001,4.25,0.02,0\n");
  }

  TEST_CASE("lcap bench with one constraint has ratio one") {
    const auto rows = lcap_bench({3}, 1, 3);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
      if (!r.ratio) continue;
      CHECK(*r.ratio == doctest::Approx(1.0));
    }
  }

  TEST_CASE("lcap bench ratios never exceed one") {
    for (const auto& r : lcap_bench({2, 5}, 4, 5)) {
      if (r.ratio) CHECK(*r.ratio <= 1.0 + 1e-9);
      if (r.curls_height && r.oracle_height) CHECK(*r.oracle_height <= *r.curls_height + 1e-9);
    }
  }

  TEST_CASE("lcap bench output without timings is deterministic") {
    std::ostringstream a, b;
    write_lcap_bench(a, lcap_bench({4}, 3, 4), false);
    write_lcap_bench(b, lcap_bench({4}, 3, 4), false);
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("d,m,seed,curls_height,oracle_height,ratio,curls_micros,oracle_micros,note\n", 0) == 0);
  }
}
