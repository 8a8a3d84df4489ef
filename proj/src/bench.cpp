#include "gains/bench.hpp"

#include "gains/lcap.hpp"
#include "gains/parallel.hpp"

#include <chrono>
#include <cmath>
#include <random>

namespace gains {

const std::vector<double>& cas_vs_as_tolerances() {
  static const std::vector<double> taus = {1e-6, 4.7e-6, 2.2e-5, 1e-4, 5e-4, 2.3e-3,
                                           0.01, 0.05,   0.24,   1.0,  2.42};
  return taus;
}

Vector comparison_ode(double t, const Vector& z) {
  const double c = std::cos(t);
  return z * std::cos(0.8 * c * c + t);
}

double dyadic_round(double x, int bits) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  int e = 0;
  std::frexp(x, &e);
  return std::ldexp(std::round(std::ldexp(x, bits - e)), e - bits);
}

namespace {

struct Cell {
  bool ok = false;
  double cas_steps = 0.0, cas_error = 0.0, as_steps = 0.0, as_error = 0.0;
};

SolverConfig base_config(const CasVsAsOptions& opts, double tau) {
  SolverConfig cfg;
  cfg.alpha = opts.alpha;
  cfg.tau = tau;
  cfg.t_end = opts.t_end;
  cfg.h_min = std::ldexp(1.0, -26);
  cfg.order = 5;
  cfg.tableau = TableauId::Dopri5;
  cfg.max_steps = 1000000;
  return cfg;
}

}  // namespace

std::vector<CasVsAsRow> cas_vs_as(const CasVsAsOptions& opts) {
  for (double tau : opts.tolerances) {
    if (!(tau > 0.0)) throw Error("cas_vs_as: tolerances must be positive");
  }
  std::mt19937_64 rng(opts.seed);
  std::vector<double> z0s(opts.states);
  for (auto& z : z0s) z = uniform(rng, -2.5, 2.5);

  const VectorField g = comparison_ode;
  std::vector<double> reference(opts.states);
  parallel_for(opts.states, opts.workers, [&](std::size_t i) {
    SolverConfig cfg = base_config(opts, opts.reference_tau);
    cfg.tableau = TableauId::Dopri8;
    cfg.order = 8;
    const Vector z0 = Vector::Constant(1, z0s[i]);
    cfg.eta = initial_step_proposal(g, z0, cfg.tau, cfg);
    reference[i] = as_integrate(g, z0, cfg).z_final[0];
  });

  std::vector<CasVsAsRow> rows;
  for (double tau : opts.tolerances) {
    std::vector<Cell> cells(opts.states);
    parallel_for(opts.states, opts.workers, [&](std::size_t i) {
      const Vector z0 = Vector::Constant(1, z0s[i]);
      SolverConfig cfg = base_config(opts, tau);
      Cell c;
      try {
        const double h0 = initial_step_proposal(g, z0, tau, cfg);
        cfg.eta = h0;
        const AsResult as = as_integrate(g, z0, cfg);
        cfg.eta = dyadic_round(h0);
        const CasResult cas = cas_integrate(g, z0, cfg);
        c.as_steps = static_cast<double>(as.attempted);
        c.as_error = std::abs(as.z_final[0] - reference[i]);
        c.cas_steps = static_cast<double>(cas.steps());
        c.cas_error = std::abs(cas.z_final[0] - reference[i]);
        c.ok = all_finite(as.z_final) && all_finite(cas.z_final);
      } catch (const Error&) {
        c.ok = false;
      }
      cells[i] = c;
    });
    CasVsAsRow row;
    row.tau = tau;
    std::size_t n = 0;
    for (const Cell& c : cells) {
      if (!c.ok) {
        ++row.failures;
        continue;
      }
      ++n;
      row.cas_steps += c.cas_steps;
      row.cas_error += c.cas_error;
      row.as_steps += c.as_steps;
      row.as_error += c.as_error;
    }
    if (n > 0) {
      const double k = 1.0 / static_cast<double>(n);
      row.cas_steps *= k;
      row.cas_error *= k;
      row.as_steps *= k;
      row.as_error *= k;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_cas_vs_as(std::ostream& out, const std::vector<CasVsAsRow>& rows) {
  out << "tau,cas_mean_steps,cas_mean_error,as_mean_steps,as_mean_error,failures\n";
  for (const auto& r : rows) {
    out << format_double(r.tau) << ',' << format_double(r.cas_steps) << ','
        << format_double(r.cas_error) << ',' << format_double(r.as_steps) << ','
        << format_double(r.as_error) << ',' << r.failures << '\n';
  }
}

namespace {

double height_above(const AffineMap& a, const AffineMap& relation, const Box& box) {
  const Vector c = box.center();
  return (a.apply(c) - relation.apply(c))[0];
}

template <class Fn>
double micros(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::vector<LcapBenchRow> lcap_bench(const std::vector<int>& dims, int m, std::size_t seeds,
                                     std::uint64_t first_seed) {
  if (m < 1) throw Error("lcap_bench needs m >= 1");
  std::vector<LcapBenchRow> rows;
  for (int d : dims) {
    for (std::size_t s = 0; s < seeds; ++s) {
      LcapBenchRow row;
      row.d = d;
      row.m = m;
      row.seed = first_seed + s;
      LcapInstance inst;
      try {
        inst = generate_lcap_instance(d, m, row.seed);
      } catch (const GenerationBudgetError& e) {
        row.note = "generation budget exhausted";
        rows.push_back(row);
        continue;
      }
      AffineMap curls;
      row.curls_micros = micros([&] { curls = curls_merge(inst.set); });
      row.curls_height = height_above(curls, inst.relation, inst.set.box);
      if (d <= kOracleDimCap) {
        AffineMap oracle;
        row.oracle_micros = micros([&] { oracle = exact_oracle(inst.set); });
        row.oracle_height = height_above(oracle, inst.relation, inst.set.box);
        row.ratio = volume_ratio(oracle, curls, inst.set.box, inst.relation);
      }
      rows.push_back(row);
    }
  }
  return rows;
}

void write_lcap_bench(std::ostream& out, const std::vector<LcapBenchRow>& rows, bool with_timings) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  out << "d,m,seed,curls_height,oracle_height,ratio,curls_micros,oracle_micros,note\n";
  for (const auto& r : rows) {
    out << r.d << ',' << r.m << ',' << r.seed << ',' << opt(r.curls_height) << ','
        << opt(r.oracle_height) << ',' << opt(r.ratio) << ',';
    if (with_timings) {
      out << format_double(r.curls_micros) << ',' << (r.oracle_height ? format_double(r.oracle_micros) : "");
    } else {
      out << ',';
    }
    out << ',' << r.note << '\n';
  }
}

}  // namespace gains
