#include "gains/verifier.hpp"

#include "gains/lcap.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>

namespace gains {

GraphBacksubResult graph_backsubstitute(const TrajectoryGraph& graph, const LinearBounds& query) {
  const std::size_t n = graph.node_count();
  const std::size_t term = graph.terminal();
  const Index dim = graph.node(term).box.dim();
  if (query.lower.cols() != dim || query.upper.cols() != dim) {
    throw DimensionError("query does not match the terminal state dimension");
  }
  if (!graph.has_transformers()) {
    throw Error("graph has no linear step records; build it in linear mode");
  }
  std::vector<std::optional<LinearBounds>> at(n);
  at[term] = query;
  GraphBacksubResult res;
  const auto& order = graph.expansion_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t u = *it;
    const GraphNode& node = graph.node(u);
    std::vector<AffineMap> lows;
    std::vector<AffineMap> ups;
    Box box = query.box;
    for (std::size_t e : node.out_edges) {
      const GraphEdge& edge = graph.edges()[e];
      if (!at[edge.to]) throw Error("backsubstitution reached a node before its successors");
      LinearBounds b = *at[edge.to];
      if (!edge.identity()) b = node.transformer->backsubstitute(node.output_block, b);
      box = lows.empty() ? b.box : box_hull(box, b.box);
      lows.push_back(std::move(b.lower));
      ups.push_back(std::move(b.upper));
    }
    if (lows.empty()) throw Error("expanded node without outgoing edges");
    LinearBounds merged{lows.front(), ups.front(), box};
    if (lows.size() > 1) {
      ++res.merges;
      merged.lower = curls_merge_rows(lows, node.box, Side::Lower);
      merged.upper = curls_merge_rows(ups, node.box, Side::Upper);
      merged.box = box_meet(box, concretize(merged, node.box));
    }
    at[u] = std::move(merged);
  }
  res.bounds = *at[graph.entry()];
  return res;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Gains: return "gains";
    case Method::Box: return "box";
    case Method::Linear: return "linear";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "gains") return Method::Gains;
  if (name == "box") return Method::Box;
  if (name == "linear") return Method::Linear;
  throw Error("unknown method \"" + name + "\" (expected gains, box or linear)");
}

std::string to_string(Status s) {
  switch (s) {
    case Status::Verified: return "verified";
    case Status::Unknown: return "unknown";
    case Status::Falsified: return "falsified";
  }
  return "?";
}

RobustnessSpec RobustnessSpec::cls(Index target, double eps) {
  RobustnessSpec s;
  s.classification = ClassificationSpec{target};
  s.epsilon = eps;
  return s;
}

RobustnessSpec RobustnessSpec::reg(double nu, double delta_tol, double eps) {
  RobustnessSpec s;
  s.regression = RegressionSpec{nu, delta_tol, std::nullopt, {}};
  s.epsilon = eps;
  return s;
}

void RobustnessSpec::validate() const {
  if (classification.has_value() == regression.has_value()) {
    throw Error("robustness spec must be either classification or regression");
  }
  if (!(epsilon >= 0.0)) throw Error("invariant violated: epsilon must be non-negative");
  if (regression && !(regression->nu >= 0.0 && regression->delta_tol >= 0.0)) {
    throw Error("invariant violated: nu and delta must be non-negative");
  }
  if (clamp && !(clamp->lo <= clamp->hi)) throw Error("invariant violated: empty clamp range");
}

namespace {

struct Pipeline {
  Box output;
  std::optional<Vector> margin;
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::int64_t merges = 0;
};

Pipeline run_pipeline(const ModelSpec& model, const Box& region, const AbstractMode& mode,
                      std::optional<Index> target) {
  const bool linear = mode.kind == DomainKind::Linear;
  CompositeTransformer enc(region, linear, mode.policy);
  const Index e_out = enc.add_layers(0, model.encoder, std::nullopt);
  enc.refine(e_out);

  const TrajectoryGraph graph = build_graph(model, enc.box(e_out), mode);
  const Box& term_box = graph.node(graph.terminal()).box;

  CompositeTransformer dec(term_box, linear, mode.policy);
  const Index d_out = dec.add_layers(0, model.decoder, std::nullopt);
  dec.refine(d_out);

  Pipeline p;
  p.output = dec.box(d_out);
  p.nodes = graph.node_count();
  p.edges = graph.edge_count();
  const Index c = p.output.dim();

  Matrix q = Matrix::Zero(target ? 2 * c : c, c);
  q.topRows(c).setIdentity();
  Vector margin(c);
  if (target) {
    for (Index i = 0; i < c; ++i) {
      margin[i] = p.output.lower()[*target] - p.output.upper()[i];
      if (i == *target) continue;
      q(c + i, *target) = 1.0;
      q(c + i, i) = -1.0;
    }
  }

  if (linear) {
    const AffineMap qm(q, Vector::Zero(q.rows()));
    LinearBounds lb{qm, qm, interval_affine(qm, p.output)};
    lb = dec.backsubstitute(d_out, lb);
    const GraphBacksubResult gb = graph_backsubstitute(graph, lb);
    p.merges = gb.merges;
    lb = enc.backsubstitute(e_out, gb.bounds);
    const Box full = concretize(lb, region);
    Box out_full(full.lower().head(c), full.upper().head(c));
    p.output = box_meet(p.output, out_full);
    if (target) {
      for (Index i = 0; i < c; ++i) margin[i] = std::max(margin[i], full.lower()[c + i]);
    }
  }
  if (target) {
    margin[*target] = std::numeric_limits<double>::infinity();
    p.margin = margin;
  }
  return p;
}

}  // namespace

OutputBounds certify(const ModelSpec& model, const Box& region, Method method,
                     std::optional<Index> target) {
  if (region.dim() != model.input_dim()) {
    throw DimensionError("input has dim " + std::to_string(region.dim()) + ", model expects " +
                         std::to_string(model.input_dim()));
  }
  if (target && (*target < 0 || *target >= model.output_dim())) {
    throw Error("target class " + std::to_string(*target) + " out of range");
  }
  std::vector<AbstractMode> modes;
  switch (method) {
    case Method::Box: modes = {AbstractMode::box()}; break;
    case Method::Linear: modes = {AbstractMode::linear(ReluPolicy::AreaMin)}; break;
    case Method::Gains:
      modes = {AbstractMode::box(), AbstractMode::linear(ReluPolicy::AreaMin),
               AbstractMode::linear(ReluPolicy::AllZero), AbstractMode::linear(ReluPolicy::AllOne)};
      break;
  }
  OutputBounds out;
  bool first = true;
  for (const auto& mode : modes) {
    Pipeline p = run_pipeline(model, region, mode, target);
    if (first) {
      out.output = p.output;
      out.margin_lower = p.margin;
      first = false;
    } else {
      out.output = box_meet(out.output, p.output);
      if (p.margin) out.margin_lower = out.margin_lower->cwiseMax(*p.margin);
    }
    out.nodes = std::max(out.nodes, p.nodes);
    out.edges = std::max(out.edges, p.edges);
    out.merges += p.merges;
  }
  return out;
}

Box input_region(const Vector& x, const RobustnessSpec& spec) {
  Box b = Box::around(x, spec.epsilon);
  if (spec.clamp) b = b.clamped(spec.clamp->lo, spec.clamp->hi);
  return b;
}

double masked_mae(const Vector& output, const Vector& target, const std::vector<bool>& mask) {
  if (output.size() != target.size()) throw DimensionError("MAE: output and target lengths differ");
  double sum = 0.0;
  Index count = 0;
  for (Index i = 0; i < output.size(); ++i) {
    if (!mask.empty() && !mask.at(i)) continue;
    sum += std::abs(output[i] - target[i]);
    ++count;
  }
  if (count == 0) throw Error("MAE: feature mask selects nothing");
  return sum / static_cast<double>(count);
}

double mae_upper_bound(const Box& output, const Vector& target, const std::vector<bool>& mask) {
  if (output.dim() != target.size()) throw DimensionError("MAE: output and target lengths differ");
  double sum = 0.0;
  Index count = 0;
  for (Index i = 0; i < output.dim(); ++i) {
    if (!mask.empty() && !mask.at(i)) continue;
    sum += std::max(std::abs(output.lower()[i] - target[i]), std::abs(output.upper()[i] - target[i]));
    ++count;
  }
  if (count == 0) throw Error("MAE: feature mask selects nothing");
  return sum / static_cast<double>(count);
}

namespace {

Index argmax(const Vector& y) {
  Index best = 0;
  for (Index i = 1; i < y.size(); ++i) {
    if (y[i] > y[best]) best = i;
  }
  return best;
}

bool classifies_as(const Vector& y, Index t) {
  for (Index i = 0; i < y.size(); ++i) {
    if (i != t && !(y[t] > y[i])) return false;
  }
  return true;
}

Vector sample_in(const Box& box, std::mt19937_64& rng) {
  Vector v(box.dim());
  for (Index i = 0; i < box.dim(); ++i) v[i] = uniform(rng, box.lower()[i], box.upper()[i]);
  return v;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

Verdict verify(const ModelSpec& model, const Vector& input, const RobustnessSpec& spec,
               Method method, const VerifyOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  spec.validate();
  if (spec.classification && model.output != OutputRole::Classification) {
    throw Error("classification spec given for a regression model");
  }
  if (spec.regression && model.output != OutputRole::Regression) {
    throw Error("regression spec given for a classification model");
  }
  if (input.size() != model.input_dim()) {
    throw DimensionError("input has dim " + std::to_string(input.size()) + ", model expects " +
                         std::to_string(model.input_dim()));
  }
  if (spec.classification) {
    const Index t = spec.classification->target;
    if (t < 0 || t >= model.output_dim()) throw Error("target class out of range");
  } else if (model.output_dim() != model.input_dim()) {
    throw DimensionError("regression needs output dim equal to input dim");
  }

  Verdict v;
  const Box region = input_region(input, spec);
  Vector center = input;
  if (spec.clamp) center = center.cwiseMax(spec.clamp->lo).cwiseMin(spec.clamp->hi);

  // predicate on a concrete output: true when the property holds
  std::function<bool(const Vector&)> holds;
  try {
    const Vector y = forward(model, center).output;
    if (spec.classification) {
      const Index t = spec.classification->target;
      holds = [t](const Vector& out) { return classifies_as(out, t); };
    } else {
      const RegressionSpec& r = *spec.regression;
      const double ref = r.reference_mae ? *r.reference_mae : masked_mae(y, center, r.mask);
      v.threshold = (1.0 + r.nu) * ref + r.delta_tol;
      const double thr = v.threshold;
      holds = [thr, center, mask = r.mask](const Vector& out) {
        return masked_mae(out, center, mask) < thr;
      };
    }
    if (!holds(y)) {
      if (spec.classification) {
        const Index t = spec.classification->target;
        v.bound = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < y.size(); ++i) {
          if (i != t) v.bound = std::min(v.bound, y[t] - y[i]);
        }
      } else {
        v.bound = masked_mae(y, center, spec.regression->mask);
      }
      v.status = Status::Falsified;
      v.witness = center;
      v.diagnostic = "unperturbed input violates the property";
      v.millis = elapsed_ms(start);
      return v;
    }
  } catch (const Error& e) {
    v.status = Status::Unknown;
    v.diagnostic = std::string("concrete evaluation failed: ") + e.what();
    v.millis = elapsed_ms(start);
    return v;
  }

  try {
    const std::optional<Index> target =
        spec.classification ? std::optional<Index>(spec.classification->target) : std::nullopt;
    OutputBounds ob = certify(model, region, method, target);
    if (spec.classification) {
      v.bound = ob.margin_lower->minCoeff();
      if (v.bound > 0.0) v.status = Status::Verified;
    } else {
      v.bound = mae_upper_bound(ob.output, center, spec.regression->mask);
      if (v.bound < v.threshold) v.status = Status::Verified;
    }
    v.bounds = std::move(ob);
  } catch (const Error& e) {
    v.status = Status::Unknown;
    v.diagnostic = std::string("bound computation failed: ") + e.what();
  }

  if (v.status != Status::Verified && opts.samples > 0) {
    std::mt19937_64 rng(opts.seed);
    for (std::int64_t s = 0; s < opts.samples; ++s) {
      const Vector x = sample_in(region, rng);
      try {
        if (!holds(forward(model, x).output)) {
          v.status = Status::Falsified;
          v.witness = x;
          v.diagnostic = "counterexample found by sampling";
          break;
        }
      } catch (const Error&) {
        // a diverging sample is not a counterexample
      }
    }
  }
  v.millis = elapsed_ms(start);
  return v;
}

SoundnessSample empirical_soundness(const ModelSpec& model, const Vector& input, double epsilon,
                                    std::int64_t n_samples, std::uint64_t seed, Method method,
                                    std::optional<Interval> clamp, double tol) {
  if (n_samples < 1) throw Error("empirical_soundness needs at least one sample");
  RobustnessSpec spec;
  spec.epsilon = epsilon;
  spec.clamp = clamp;
  const Box region = input_region(input, spec);
  Vector center = input;
  if (clamp) center = center.cwiseMax(clamp->lo).cwiseMin(clamp->hi);

  std::optional<Index> target;
  if (model.output == OutputRole::Classification && model.output_dim() >= 2) {
    target = argmax(forward(model, center).output);
  }
  const OutputBounds ob = certify(model, region, method, target);

  SoundnessSample rep;
  std::mt19937_64 rng(seed);
  double gap_sum = 0.0;
  for (std::int64_t s = 0; s < n_samples; ++s) {
    const Vector x = s == 0 ? center : sample_in(region, rng);
    const Vector y = forward(model, x).output;
    double worst = 0.0;
    double gap = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
      const double lo = ob.output.lower()[i];
      const double hi = ob.output.upper()[i];
      const double slack = tol * (1.0 + std::abs(y[i]));
      worst = std::max({worst, lo - y[i] - slack, y[i] - hi - slack});
      gap += std::min(y[i] - lo, hi - y[i]);
    }
    if (target) {
      for (Index i = 0; i < y.size(); ++i) {
        if (i == *target) continue;
        const double m = y[*target] - y[i];
        worst = std::max(worst, (*ob.margin_lower)[i] - m - tol * (1.0 + std::abs(m)));
      }
    }
    gap_sum += gap;
    ++rep.samples;
    if (worst > 0.0) {
      ++rep.violations;
      rep.max_violation = std::max(rep.max_violation, worst);
      if (!rep.witness) rep.witness = x;
    }
  }
  rep.mean_gap = gap_sum / static_cast<double>(rep.samples);
  return rep;
}

void write_result_header(std::ostream& out) {
  out << "input_id,method,epsilon,status,margin_or_mae_bound,graph_nodes,graph_edges,millis\n";
}

void write_result_row(std::ostream& out, std::size_t input_id, Method method, double epsilon,
                      const Verdict& v) {
  char ms[32];
  std::snprintf(ms, sizeof(ms), "%.3f", v.millis);
  out << input_id << ',' << to_string(method) << ',' << format_double(epsilon) << ','
      << to_string(v.status) << ','
      << (v.bounds || v.status == Status::Falsified ? format_double(v.bound) : std::string("nan"))
      << ',' << (v.bounds ? v.bounds->nodes : 0) << ',' << (v.bounds ? v.bounds->edges : 0) << ','
      << ms << '\n';
}

}  // namespace gains
