#include "gains/training_support.hpp"

#include "gains/lcap.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace gains {

int update_weight(Decision d) {
  switch (d) {
    case Decision::Decrease: return 0;
    case Decision::Accept: return 1;
    case Decision::Increase: return 2;
  }
  return 1;
}

std::size_t reference_vertex(const StepKey& key, const CasTrajectory& reference) {
  if (reference.decisions.empty()) throw Error("reference trajectory has no steps");
  const double t = key.t.to_double();
  const double h = key.h.to_double();
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < reference.decisions.size(); ++i) {
    const double dist = std::abs(t - reference.keys[i].t.to_double()) +
                        std::abs(h - reference.keys[i].h.to_double());
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return best;
}

int location_index(const std::vector<StepKey>& keys, const std::vector<Decision>& updates,
                   const CasTrajectory& reference) {
  if (updates.size() > keys.size()) throw Error("location_index: more updates than vertices");
  int n = 0;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const std::size_t r = reference_vertex(keys[i], reference);
    n += update_weight(updates[i]) - update_weight(reference.decisions[r]);
  }
  return n;
}

double UpdateProbabilities::of(Decision d) const {
  switch (d) {
    case Decision::Decrease: return p_d;
    case Decision::Accept: return p_a;
    case Decision::Increase: return p_i;
  }
  return 0.0;
}

UpdateProbabilities update_probabilities(int n, Decision ref_update, double q1, double q2) {
  if (!(q1 >= 0.0 && q2 >= 0.0 && q1 + q2 <= 1.0)) {
    throw Error("update probabilities need q1, q2 >= 0 and q1 + q2 <= 1");
  }
  const double main = 1.0 - q1 - q2;
  if (n == 0 && ref_update == Decision::Accept) return {(q1 + q2) / 2, main, (q1 + q2) / 2};
  if (n > 0 || (n == 0 && ref_update == Decision::Decrease)) return {main, q2, q1};
  return {q1, q2, main};
}

void SampleConfig::validate() const {
  if (kappa < 1) throw Error("sampling needs kappa >= 1");
  if (!(q1 >= 0.0 && q2 >= 0.0 && q1 + q2 <= 1.0)) {
    throw Error("invariant violated: q1, q2 >= 0 and q1 + q2 <= 1");
  }
  if (reference.decisions.empty() || reference.keys.size() != reference.decisions.size() + 1) {
    throw Error("sampling needs a complete reference trajectory");
  }
}

namespace {

struct Cursor {
  std::vector<StepKey> keys;
  std::vector<Decision> decisions;
  StepKey key;
  ControlState state;
  Box box;
  int location = 0;
};

struct Option {
  Decision decision;
  StepGrid::Transition transition;
};

struct Checkpoint {
  Cursor at;
  Box output;
  std::vector<Option> untaken;
  Decision ref_update;
  double width = 0.0;
};

// Decisions with distinct successors; a rejected step that is forced to
// accept coincides with the plain accept.
std::vector<Option> options_at(const StepGrid& grid, const Cursor& c, const Interval& delta,
                               double tau_alpha) {
  const std::vector<Decision> ds =
      c.state.forced ? std::vector<Decision>{Decision::Accept} : branch_set(delta, tau_alpha);
  std::vector<Option> out;
  for (Decision d : ds) {
    const auto tr = grid.next(c.key, c.state, d);
    bool dup = false;
    for (const auto& o : out) {
      dup = dup || (o.transition.key == tr.key && o.transition.state == tr.state &&
                    o.transition.edge == tr.edge);
    }
    if (!dup) out.push_back({d, tr});
  }
  return out;
}

std::size_t choose(const std::vector<Option>& opts, int n, Decision ref, const SampleConfig& sc,
                   std::mt19937_64& rng) {
  const UpdateProbabilities p = update_probabilities(n, ref, sc.q1, sc.q2);
  double total = 0.0;
  for (const auto& o : opts) total += p.of(o.decision);
  if (total <= 0.0) {
    // no feasible branch has mass: take the one closest to the preferred update
    Decision main = Decision::Increase;
    if (p.p_a >= p.p_d && p.p_a >= p.p_i) main = Decision::Accept;
    if (p.p_d > p.p_a && p.p_d >= p.p_i) main = Decision::Decrease;
    std::size_t best = 0;
    for (std::size_t i = 1; i < opts.size(); ++i) {
      if (std::abs(update_weight(opts[i].decision) - update_weight(main)) <
          std::abs(update_weight(opts[best].decision) - update_weight(main))) {
        best = i;
      }
    }
    return best;
  }
  double u = uniform(rng, 0.0, total);
  for (std::size_t i = 0; i < opts.size(); ++i) {
    const double w = p.of(opts[i].decision);
    if (w <= 0.0) continue;
    if (u < w) return i;
    u -= w;
  }
  for (std::size_t i = opts.size(); i-- > 0;) {
    if (p.of(opts[i].decision) > 0.0) return i;
  }
  return 0;
}

void advance(Cursor& c, const Option& o, const Box& output, const CasTrajectory& reference) {
  const std::size_t r = reference_vertex(c.key, reference);
  c.location += update_weight(o.transition.edge) - update_weight(reference.decisions[r]);
  c.keys.push_back(c.key);
  c.decisions.push_back(o.transition.edge);
  if (o.transition.edge != Decision::Decrease) c.box = output;
  c.key = o.transition.key;
  c.state = o.transition.state;
}

}  // namespace

SampleResult sample_trajectories(const StepAbstraction& abstraction, const SolverConfig& cfg,
                                 const Box& region, const SampleConfig& sc) {
  sc.validate();
  const StepGrid grid(cfg);
  const double tau_alpha = cfg.tau_alpha();
  std::mt19937_64 rng(sc.seed);
  SampleResult res;
  std::vector<Checkpoint> pending;

  Cursor start;
  start.key = grid.entry_key();
  start.state = grid.entry_state();
  start.box = region;

  auto walk = [&](Cursor c) {
    while (!c.key.terminal()) {
      if (++res.steps > sc.max_steps) {
        throw Error("trajectory sampling exceeded its step budget of " + std::to_string(sc.max_steps));
      }
      const StepAbstraction::Result step = abstraction.step(c.box, c.key);
      std::vector<Option> opts = options_at(grid, c, step.delta, tau_alpha);
      std::size_t pick = 0;
      if (opts.size() > 1) {
        const Decision ref = sc.reference.decisions[reference_vertex(c.key, sc.reference)];
        pick = choose(opts, c.location, ref, sc, rng);
        Checkpoint cp{c, step.output, {}, ref, c.box.total_width()};
        for (std::size_t i = 0; i < opts.size(); ++i) {
          if (i != pick) cp.untaken.push_back(opts[i]);
        }
        pending.push_back(std::move(cp));
        ++res.checkpoints;
      }
      advance(c, opts[pick], step.output, sc.reference);
    }
    SampledPath p;
    p.keys = std::move(c.keys);
    p.keys.push_back(c.key);
    p.decisions = std::move(c.decisions);
    p.final_box = std::move(c.box);
    p.location = c.location;
    res.paths.push_back(std::move(p));
  };

  walk(start);
  while (res.paths.size() < sc.kappa && !pending.empty()) {
    double n_s = 0.0;
    for (const auto& p : res.paths) n_s += p.location;
    n_s /= static_cast<double>(res.paths.size());
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pending.size(); ++i) {
      const Checkpoint& cp = pending[i];
      const double score = std::abs(cp.at.location - n_s) / 2.0 -
                           static_cast<double>(cp.at.keys.size() + 1) - cp.width;
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    Checkpoint& cp = pending[best];
    const std::size_t pick = choose(cp.untaken, cp.at.location, cp.ref_update, sc, rng);
    Cursor c = cp.at;
    const Option opt = cp.untaken[pick];
    const Box output = cp.output;
    cp.untaken.erase(cp.untaken.begin() + static_cast<std::ptrdiff_t>(pick));
    if (cp.untaken.empty()) pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(best));
    advance(c, opt, output, sc.reference);
    walk(std::move(c));
  }
  return res;
}

CasTrajectory path_trajectory(const TrajectoryGraph& graph, const std::vector<std::size_t>& edges) {
  CasTrajectory t;
  std::size_t cur = graph.entry();
  for (std::size_t e : edges) {
    const GraphEdge& edge = graph.edges().at(e);
    if (edge.from != cur) throw Error("edge sequence is not a path");
    t.keys.push_back(graph.node(cur).key);
    t.decisions.push_back(edge.label);
    cur = edge.to;
  }
  t.keys.push_back(graph.node(cur).key);
  return t;
}

double robust_loss_value(double std_loss, double rob_loss, const Vector& widths, double eps_prime,
                         double eps_t, double w1, double w2) {
  if (!(eps_t > 0.0)) throw Error("robust_loss_value: eps_t must be positive");
  if (!(eps_prime >= 0.0 && eps_prime <= eps_t)) {
    throw Error("robust_loss_value: eps_prime must lie in [0, eps_t]");
  }
  const double k = w1 * eps_prime / eps_t;
  return (1.0 - k) * std_loss + k * rob_loss + w2 * l1_norm(widths);
}

double smooth_schedule(double eps_t, double e_start, double e_end, double mid, double epoch) {
  if (!(e_start < e_end)) throw Error("smooth_schedule needs e_start < e_end");
  if (!(mid > 0.0 && mid < 1.0)) throw Error("smooth_schedule needs mid in (0, 1)");
  if (epoch <= e_start) return 0.0;
  if (epoch >= e_end) return eps_t;
  constexpr double beta = 4.0;
  const double knee = e_start + (e_end - e_start) * mid;
  const double t = std::pow(knee - e_start, beta - 1.0);
  const double a = eps_t / ((e_end - knee) * beta * t + (knee - e_start) * t);
  const double knee_value = a * std::pow(knee - e_start, beta);
  if (epoch < knee) return a * std::pow(epoch - e_start, beta);
  return std::min(knee_value + (eps_t - knee_value) * (epoch - knee) / (e_end - knee), eps_t);
}

double sin_schedule(double q_start, double q_end, double e1, double e2, double epoch) {
  if (!(e1 < e2)) throw Error("sin_schedule needs e1 < e2");
  if (epoch <= e1) return q_start;
  if (epoch > e2) return q_end;
  const double e_mid = (e2 + e1) / 2.0;
  return std::sin(std::numbers::pi * (epoch - e_mid) / (e2 - e1)) * (q_end - q_start) / 2.0 +
         (q_end + q_start) / 2.0;
}

}  // namespace gains
