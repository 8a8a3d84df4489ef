// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "gains/bench.hpp"
#include "gains/lcap.hpp"
#include "gains/training_support.hpp"
#include "gains/verifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>

using namespace gains;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Graph sizes collected by criteria 1 to 3 for the size bound check.
struct SizeRecord {
  std::size_t nodes;
  double bound;
};
std::vector<SizeRecord> g_sizes;

void record_size(std::size_t nodes, const SolverConfig& cfg) {
  g_sizes.push_back({nodes, node_count_bound(cfg)});
}

Rational r(std::int64_t n, std::int64_t d = 1) { return Rational(n, d); }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// Models shared by criteria 2, 3 and 7.
std::vector<ModelSpec> fuzz_models() {
  std::vector<ModelSpec> out;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RandomModelOptions o;
    o.input_dim = 2 + static_cast<Index>(seed % 4);
    o.state_dim = 2 + static_cast<Index>(seed % 5);  // 2..6
    o.hidden_dim = 2 * o.state_dim;
    o.output_dim = 2 + static_cast<Index>(seed % 3);
    o.output = seed % 5 == 4 ? OutputRole::Regression : OutputRole::Classification;
    o.solver = default_test_solver();
    out.push_back(random_model(o, 1000 + seed));
  }
  return out;
}

Vector random_input(Index n, std::mt19937_64& rng) {
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[i] = uniform(rng, -1, 1);
  return x;
}

Outcome splitting_example() {
  const auto stub = splitting_stub();
  const TrajectoryGraph g = build_graph(stub, splitting_config(), Box::point(Vector::Zero(1)));
  record_size(g.node_count(), splitting_config());
  using D = Decision;
  auto k = [](std::int64_t tn, std::int64_t td, std::int64_t hn, std::int64_t hd) {
    return StepKey{r(tn, td), r(hn, hd)};
  };
  const std::vector<StepKey> nodes = {k(0, 1, 1, 2), k(0, 1, 1, 4), k(1, 4, 1, 4), k(1, 4, 1, 2),
                                      k(1, 2, 1, 4), k(1, 2, 1, 2), k(3, 4, 1, 4), k(1, 1, 0, 1)};
  struct E {
    StepKey a, b;
    D d;
  };
  const std::vector<E> edges = {
      {k(0, 1, 1, 2), k(0, 1, 1, 4), D::Decrease}, {k(0, 1, 1, 2), k(1, 2, 1, 2), D::Accept},
      {k(0, 1, 1, 4), k(1, 4, 1, 2), D::Increase}, {k(0, 1, 1, 4), k(1, 4, 1, 4), D::Accept},
      {k(1, 4, 1, 2), k(1, 4, 1, 4), D::Decrease}, {k(1, 4, 1, 2), k(3, 4, 1, 4), D::Accept},
      {k(1, 4, 1, 4), k(1, 2, 1, 2), D::Increase}, {k(1, 4, 1, 4), k(1, 2, 1, 4), D::Accept},
      {k(1, 2, 1, 2), k(1, 2, 1, 4), D::Decrease}, {k(1, 2, 1, 2), k(1, 1, 0, 1), D::Accept},
      {k(1, 2, 1, 4), k(3, 4, 1, 4), D::Accept},   {k(3, 4, 1, 4), k(1, 1, 0, 1), D::Accept},
  };
  Outcome o;
  o.pass = g.node_count() == nodes.size() && g.edge_count() == edges.size();
  for (const auto& n : nodes) o.pass = o.pass && g.find(n).has_value();
  for (const auto& e : edges) {
    const auto a = g.find(e.a), b = g.find(e.b);
    o.pass = o.pass && a && b && g.edge_between(*a, *b, e.d).has_value();
  }
  o.detail = std::to_string(g.node_count()) + " nodes, " + std::to_string(g.edge_count()) + " edges";
  return o;
}

struct FuzzStats {
  std::int64_t samples = 0;
  std::int64_t violations = 0;
  std::int64_t errors = 0;
  std::int64_t dominance_failures = 0;
  std::int64_t instances = 0;
};

FuzzStats g_fuzz;

Outcome soundness(const std::vector<ModelSpec>& models) {
  std::mt19937_64 rng(2);
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const ModelSpec& m = models[mi];
    const Vector x = random_input(m.input_dim(), rng);
    for (double eps : {0.01, 0.05}) {
      Box widths[3];
      std::optional<Vector> margins[3];
      bool ok = true;
      int idx = 0;
      for (Method meth : {Method::Gains, Method::Box, Method::Linear}) {
        try {
          const SoundnessSample s = empirical_soundness(m, x, eps, 1000, mi, meth);
          g_fuzz.samples += s.samples;
          g_fuzz.violations += s.violations;
          std::optional<Index> target;
          if (m.output == OutputRole::Classification) {
            const Vector y = forward(m, x).output;
            target = static_cast<Index>(std::max_element(y.begin(), y.end()) - y.begin());
          }
          const OutputBounds ob = certify(m, Box::around(x, eps), meth, target);
          widths[idx] = ob.output;
          margins[idx] = ob.margin_lower;
          record_size(ob.nodes, m.solver);
        } catch (const Error& e) {
          ++g_fuzz.errors;
          ok = false;
          std::fprintf(stderr, "model %zu eps %g %s: %s\n", mi, eps, to_string(meth).c_str(), e.what());
        }
        ++idx;
      }
      if (!ok) continue;
      ++g_fuzz.instances;
      const Vector wg = widths[0].widths();
      for (int j = 1; j < 3; ++j) {
        if (((widths[j].widths() - wg).array() < -1e-12).any()) ++g_fuzz.dominance_failures;
        if (margins[0] && ((*margins[0] - *margins[j]).array() < -1e-12).any()) ++g_fuzz.dominance_failures;
      }
    }
  }
  Outcome o;
  o.pass = g_fuzz.violations == 0 && g_fuzz.errors == 0;
  o.detail = std::to_string(g_fuzz.samples) + " samples, " + std::to_string(g_fuzz.violations) +
             " violations, " + std::to_string(g_fuzz.errors) + " errors";
  return o;
}

Outcome dominance() {
  Outcome o;
  o.pass = g_fuzz.dominance_failures == 0 && g_fuzz.errors == 0 && g_fuzz.instances == 100;
  o.detail = std::to_string(g_fuzz.instances) + " instances, " +
             std::to_string(g_fuzz.dominance_failures) + " wider than box or linear";
  return o;
}

Outcome embedding(const std::vector<ModelSpec>& models) {
  std::mt19937_64 rng(3);
  std::int64_t checked = 0, missing = 0, mismatched = 0;
  double worst = 0.0;
  for (const ModelSpec& m : models) {
    for (int s = 0; s < 200; ++s) {
      const Vector x = random_input(m.input_dim(), rng);
      const Vector z0 = eval_layers(m.encoder, x, std::nullopt);
      const CasResult c = cas_integrate(m.dynamics, z0, m.solver);
      const AbstractMode mode = s % 2 ? AbstractMode::box() : AbstractMode::linear(ReluPolicy::AreaMin);
      const TrajectoryGraph g = build_graph(m, Box::point(z0), mode);
      record_size(g.node_count(), m.solver);
      ++checked;
      if (!contains_trajectory(g, c.trajectory)) ++missing;
      const Box& t = g.node(g.terminal()).box;
      double err = std::max((t.lower() - c.z_final).cwiseAbs().maxCoeff(),
                            (t.upper() - c.z_final).cwiseAbs().maxCoeff());
      if (s % 20 == 0) {
        const Vector y = forward(m, x).output;
        const Box out = certify(m, Box::point(x), s % 40 ? Method::Box : Method::Gains).output;
        err = std::max({err, (out.lower() - y).cwiseAbs().maxCoeff(), (out.upper() - y).cwiseAbs().maxCoeff()});
      }
      worst = std::max(worst, err);
      if (err > 1e-9) ++mismatched;
    }
  }
  Outcome o;
  o.pass = missing == 0 && mismatched == 0;
  o.detail = std::to_string(checked) + " inputs, " + std::to_string(missing) + " not embedded, max deviation " +
             fmt("%.2e", worst);
  return o;
}

Outcome curls() {
  std::int64_t instances = 0, gen_failures = 0, unsound = 0, ratio_fail = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (int d = 1; d <= 12; ++d) {
      for (int m = 1; m <= 6; ++m) {
        LcapInstance inst;
        try {
          inst = generate_lcap_instance(d, m, seed);
        } catch (const GenerationBudgetError&) {
          ++gen_failures;
          continue;
        }
        ++instances;
        const AffineMap c = curls_merge(inst.set);
        const AffineMap opt = exact_oracle(inst.set);
        if (!soundness_check(c, inst.set).sound || !soundness_check(opt, inst.set).sound) ++unsound;
        if (volume_ratio(opt, c, inst.set.box, inst.relation) > 1.0 + 1e-9) ++ratio_fail;
      }
    }
  }
  // dominated pairs: both merges return the dominant constraint
  std::mt19937_64 rng(4);
  std::int64_t pairs = 0, pair_fail = 0;
  for (int i = 0; i < 200; ++i) {
    const Index d = 1 + i % 12;
    Vector lo(d), hi(d);
    Matrix a(1, d);
    for (Index j = 0; j < d; ++j) {
      lo[j] = uniform(rng, -1, 0);
      hi[j] = lo[j] + uniform(rng, 0.1, 1);
      a(0, j) = uniform(rng, -1, 1);
    }
    const AffineMap top(a, Vector::Constant(1, uniform(rng, -1, 1)));
    const AffineMap low(a, top.offset() - Vector::Constant(1, uniform(rng, 0.1, 1)));
    const ConstraintSet set{i % 2 ? std::vector<AffineMap>{top, low} : std::vector<AffineMap>{low, top},
                            Box(lo, hi)};
    ++pairs;
    if (std::abs(volume_ratio(exact_oracle(set), curls_merge(set), set.box) - 1.0) > 1e-9) ++pair_fail;
  }
  Outcome o;
  o.pass = unsound == 0 && ratio_fail == 0 && pair_fail == 0 && instances > 0;
  o.detail = std::to_string(instances) + " instances (" + std::to_string(gen_failures) +
             " draws exhausted the generation budget), " + std::to_string(unsound) + " unsound, " +
             std::to_string(ratio_fail) + " ratios above 1, " + std::to_string(pair_fail) + "/" +
             std::to_string(pairs) + " dominated pairs off 1";
  return o;
}

// Best error reachable with at most `steps` mean steps, log-log interpolated.
struct Curve {
  std::vector<std::pair<double, double>> pts;  // (steps, error), steps ascending, error decreasing

  explicit Curve(std::vector<std::pair<double, double>> raw) {
    std::sort(raw.begin(), raw.end());
    for (const auto& p : raw) {
      if (pts.empty() || p.second < pts.back().second) pts.push_back(p);
    }
  }
  bool covers(double s) const { return s >= pts.front().first && s <= pts.back().first; }
  double at(double s) const {
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const auto [s0, e0] = pts[i];
      const auto [s1, e1] = pts[i + 1];
      if (s >= s0 && s <= s1) {
        if (s1 == s0) return std::min(e0, e1);
        const double f = (std::log(s) - std::log(s0)) / (std::log(s1) - std::log(s0));
        return std::exp(std::log(e0) + f * (std::log(e1) - std::log(e0)));
      }
    }
    return pts.back().second;
  }
};

Outcome cas_vs_as_check() {
  CasVsAsOptions opts;
  const auto rows = cas_vs_as(opts);
  std::vector<std::pair<double, double>> as_pts, cas_pts;
  bool steps_ok = true;
  std::size_t failures = 0;
  double worst_steps = 0.0;
  for (const auto& row : rows) {
    failures += row.failures;
    as_pts.emplace_back(row.as_steps, row.as_error);
    cas_pts.emplace_back(row.cas_steps, row.cas_error);
    const double rel = row.cas_steps / (opts.alpha * row.as_steps);
    worst_steps = std::max(worst_steps, rel);
    steps_ok = steps_ok && row.cas_steps <= 1.1 * opts.alpha * row.as_steps;
  }
  const Curve as_curve(as_pts);
  const Curve cas_curve(cas_pts);
  double worst_err = 0.0;
  std::size_t matched = 0;
  for (const auto& [s, e] : cas_curve.pts) {
    if (!as_curve.covers(s)) continue;
    ++matched;
    worst_err = std::max(worst_err, e / as_curve.at(s));
  }
  // raw points, including CAS tolerances that no longer change the step count
  std::size_t raw_over = 0;
  for (const auto& [s, e] : cas_pts) raw_over += as_curve.covers(s) && e > 3.0 * as_curve.at(s);
  std::ostringstream table;
  write_cas_vs_as(table, rows);
  std::fprintf(stderr, "%s", table.str().c_str());
  Outcome o;
  o.pass = steps_ok && worst_err <= 3.0 && matched >= 3 && failures == 0;
  o.detail = "(a) worst CAS/AS error at matched steps " + fmt("%.3g", worst_err) + " over " +
             std::to_string(matched) + " front points, " + std::to_string(raw_over) +
             " raw points above 3x; (b) max CAS steps / (alpha AS steps) " +
             fmt("%.3f", worst_steps) + "; " + std::to_string(failures) + " solver failures";
  return o;
}

Outcome size_bound() {
  std::size_t over = 0;
  for (const auto& s : g_sizes) over += static_cast<double>(s.nodes) > s.bound;
  Outcome o;
  o.pass = over == 0 && !g_sizes.empty();
  o.detail = std::to_string(g_sizes.size()) + " graphs, " + std::to_string(over) + " above the bound";
  return o;
}

Outcome dopri5_order() {
  const Dynamics exp_field({Layer::linear(Matrix::Identity(1, 1), Vector::Zero(1))}, 1);
  std::vector<double> errs;
  const std::vector<double> hs = {0.1, 0.05, 0.025, 0.0125};
  for (double h : hs) {
    Vector z = Vector::Ones(1);
    const int n = static_cast<int>(std::lround(1.0 / h));
    for (int i = 0; i < n; ++i) z = rk_step(exp_field, z, i * h, h, TableauId::Dopri5).z_hat1;
    errs.push_back(std::abs(z[0] - std::exp(1.0)));
  }
  double worst = 1e9;
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    worst = std::min(worst, std::log(errs[i] / errs[i + 1]) / std::log(hs[i] / hs[i + 1]));
  }
  Outcome o;
  o.pass = worst >= 4.5;
  o.detail = "min slope " + fmt("%.3f", worst);
  return o;
}

Outcome sampling() {
  std::mt19937_64 rng(9);
  std::int64_t bad_probs = 0;
  for (int i = 0; i < 1000; ++i) {
    const double q1 = uniform(rng, 0, 1);
    const double q2 = uniform(rng, 0, 1 - q1);
    const int n = static_cast<int>(std::floor(uniform(rng, -4, 5)));
    const auto p = update_probabilities(n, static_cast<Decision>(i % 3), q1, q2);
    if (std::abs(p.sum() - 1.0) > 1e-12 || p.p_d < 0 || p.p_a < 0 || p.p_i < 0) ++bad_probs;
  }

  const auto stub = splitting_stub();
  const SolverConfig cfg = splitting_config();
  const TrajectoryGraph g = build_graph(stub, cfg, Box::point(Vector::Zero(1)));
  std::vector<CasTrajectory> paths;
  for (const auto& p : enumerate_paths(g)) paths.push_back(path_trajectory(g, p));
  CasTrajectory ref;
  ref.keys = {{r(0), r(1, 2)}, {r(1, 2), r(1, 2)}, {r(1), r(0)}};
  ref.decisions = {Decision::Accept, Decision::Accept};

  std::int64_t runs = 0, bad_runs = 0;
  for (std::size_t kappa : {1u, 2u, 3u, 5u, 9u, 12u}) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      SampleConfig sc;
      sc.kappa = kappa;
      sc.seed = seed;
      sc.reference = ref;
      const SampleResult res = sample_trajectories(stub, cfg, Box::point(Vector::Zero(1)), sc);
      std::set<std::vector<Decision>> distinct;
      bool ok = res.paths.size() == std::min(kappa, paths.size());
      for (const auto& p : res.paths) {
        const bool valid = std::any_of(paths.begin(), paths.end(), [&](const CasTrajectory& t) {
          return t.keys == p.keys && t.decisions == p.decisions;
        });
        ok = ok && valid;
        distinct.insert(p.decisions);
      }
      ok = ok && distinct.size() == res.paths.size();
      ++runs;
      bad_runs += !ok;
    }
  }
  Outcome o;
  o.pass = bad_probs == 0 && bad_runs == 0;
  o.detail = std::to_string(bad_probs) + "/1000 bad probability rows, " + std::to_string(bad_runs) + "/" +
             std::to_string(runs) + " bad sampling runs over " + std::to_string(paths.size()) + " graph paths";
  return o;
}

bool report(int id, const std::string& name, const std::function<Outcome()>& fn) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%s criterion %d: %s (%s) [%.2fs]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.c_str(), secs);
  std::fflush(stdout);
  return o.pass;
}

}  // namespace

int main() {
  const std::vector<ModelSpec> models = fuzz_models();
  bool ok = true;
  ok &= report(1, "splitting example graph", splitting_example);
  ok &= report(2, "soundness fuzzing", [&] { return soundness(models); });
  ok &= report(3, "concrete path embedding", [&] { return embedding(models); });
  ok &= report(4, "CURLS soundness and volume", curls);
  ok &= report(5, "CAS vs AS", cas_vs_as_check);
  ok &= report(6, "graph size bound", size_bound);
  ok &= report(7, "method dominance", dominance);
  ok &= report(8, "dopri5 order", dopri5_order);
  ok &= report(9, "trajectory sampling", sampling);
  return ok ? 0 : 1;
}
