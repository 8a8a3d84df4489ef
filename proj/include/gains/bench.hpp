#pragma once

#include "gains/solver.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace gains {

/// The eleven absolute tolerances of the solver comparison.
const std::vector<double>& cas_vs_as_tolerances();

/// dz/dt = z·cos(0.8·cos(t)² + t)
Vector comparison_ode(double t, const Vector& z);

struct CasVsAsOptions {
  std::vector<double> tolerances = cas_vs_as_tolerances();
  std::size_t states = 200;
  std::uint64_t seed = 0;
  double t_end = 5.0;
  int alpha = 2;
  double reference_tau = 1e-7;
  std::size_t workers = 1;
};

struct CasVsAsRow {
  double tau = 0.0;
  double cas_steps = 0.0;  // mean attempted steps
  double cas_error = 0.0;  // mean |z(T) - z_ref(T)|
  double as_steps = 0.0;
  double as_error = 0.0;
  std::size_t failures = 0;  // states where either solver threw; excluded from the means
};

std::vector<CasVsAsRow> cas_vs_as(const CasVsAsOptions& opts);

/// Step size for CAS on a coarse dyadic grid so that exact time bookkeeping stays small.
double dyadic_round(double x, int bits = 24);

void write_cas_vs_as(std::ostream& out, const std::vector<CasVsAsRow>& rows);

struct LcapBenchRow {
  int d = 0;
  int m = 0;
  std::uint64_t seed = 0;
  std::optional<double> curls_height;   // mean height above the ground-truth relation
  std::optional<double> oracle_height;  // only for d <= oracle cap
  std::optional<double> ratio;          // oracle volume / CURLS volume
  double curls_micros = 0.0;
  double oracle_micros = 0.0;
  std::string note;  // e.g. generation budget exhausted
};

std::vector<LcapBenchRow> lcap_bench(const std::vector<int>& dims, int m, std::size_t seeds,
                                     std::uint64_t first_seed = 0);

void write_lcap_bench(std::ostream& out, const std::vector<LcapBenchRow>& rows,
                      bool with_timings = true);

}  // namespace gains
