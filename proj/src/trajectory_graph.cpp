#include "gains/trajectory_graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gains {

std::vector<Decision> branch_set(const Interval& delta, double tau_alpha) {
  std::vector<Decision> out;
  if (delta.lo <= tau_alpha) out.push_back(Decision::Increase);
  if (delta.lo <= 1.0 && delta.hi > tau_alpha) out.push_back(Decision::Accept);
  if (delta.hi > 1.0) out.push_back(Decision::Decrease);
  return out;
}

RkStepAbstraction::RkStepAbstraction(const Dynamics& dyn, const SolverConfig& cfg, AbstractMode mode)
    : dyn_(dyn), tab_(&tableau(cfg.tableau)), tau_(cfg.tau), mode_(mode) {
  if (!tab_->embedded()) throw Error("graph construction needs an embedded tableau");
}

StepAbstraction::Result RkStepAbstraction::step(const Box& box, const StepKey& key) const {
  AbstractStep s = abstract_rk_step(dyn_, box, key.t.to_double(), key.h.to_double(), *tab_, mode_, tau_);
  Result r{s.output_box(), s.delta, nullptr, s.output};
  if (mode_.kind == DomainKind::Linear) r.transformer = s.transformer;
  return r;
}

StepAbstraction::Result ScriptedStepAbstraction::step(const Box& box, const StepKey& key) const {
  return {box, delta_(key), nullptr, 0};
}

SolverConfig splitting_config() {
  SolverConfig cfg;
  cfg.alpha = 2;
  cfg.order = 5;
  cfg.eta = 0.5;
  cfg.t_end = 1.0;
  cfg.h_min = 1.0 / 16;
  cfg.tau = 1.0;
  return cfg;
}

ScriptedStepAbstraction splitting_stub() {
  const Rational half(1, 2);
  const Rational quarter(1, 4);
  return ScriptedStepAbstraction(1, [half, quarter](const StepKey& key) -> Interval {
    if (key.h == half) return {0.5, 2.0};               // accept or reject
    if (key.h == quarter && key.t < half) return {0.01, 0.5};  // accept or increase
    return {0.5, 0.5};
  });
}

std::optional<std::size_t> TrajectoryGraph::find(const StepKey& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t TrajectoryGraph::terminal() const {
  auto idx = find(terminal_key_);
  if (!idx) throw Error("graph has no terminal node");
  return *idx;
}

std::optional<std::size_t> TrajectoryGraph::edge_between(std::size_t from, std::size_t to,
                                                          Decision label) const {
  for (std::size_t e : nodes_.at(from).out_edges) {
    if (edges_[e].to == to && edges_[e].label == label) return e;
  }
  return std::nullopt;
}

bool TrajectoryGraph::has_transformers() const {
  for (const auto& n : nodes_) {
    if (n.expanded && !n.transformer) return false;
  }
  return true;
}

std::size_t TrajectoryGraph::get_or_create(const StepKey& key, const Box& box) {
  if (auto idx = find(key)) {
    GraphNode& n = nodes_[*idx];
    if (n.expanded) {
      throw Error("processing order violated: (" + key.to_string() + ") reached after expansion");
    }
    n.box = box_hull(n.box, box);
    return *idx;
  }
  GraphNode n;
  n.key = key;
  n.box = box;
  nodes_.push_back(std::move(n));
  index_.emplace(key, nodes_.size() - 1);
  return nodes_.size() - 1;
}

double node_count_bound(const SolverConfig& cfg) {
  const double levels = std::ceil((std::log(cfg.t_end) - std::log(cfg.h_min)) / std::log(cfg.alpha));
  return (cfg.t_end / cfg.h_min) * (levels + 2.0);
}

TrajectoryGraph build_graph(const StepAbstraction& abstraction, const SolverConfig& cfg,
                            const Box& region) {
  if (region.dim() != abstraction.state_dim()) {
    throw DimensionError("input region has dim " + std::to_string(region.dim()) +
                         ", dynamics state dim is " + std::to_string(abstraction.state_dim()));
  }
  const StepGrid grid(cfg);
  const double tau_alpha = cfg.tau_alpha();
  const auto budget = std::max<std::int64_t>(cfg.step_cap(),
                                             static_cast<std::int64_t>(node_count_bound(cfg)) + 1);

  TrajectoryGraph g;
  g.terminal_key_ = grid.terminal_key();
  g.entry_ = g.get_or_create(grid.entry_key(), region);
  g.nodes_[g.entry_].states.insert(grid.entry_state());

  std::set<StepKey, StepKeyOrder> frontier;
  if (!g.nodes_[g.entry_].key.terminal()) frontier.insert(g.nodes_[g.entry_].key);

  while (!frontier.empty()) {
    const StepKey key = *frontier.begin();
    frontier.erase(frontier.begin());
    if (static_cast<std::int64_t>(g.order_.size()) >= budget) {
      throw Error("graph step budget of " + std::to_string(budget) + " exhausted at (" +
                  key.to_string() + ")");
    }
    const std::size_t u = *g.find(key);
    StepAbstraction::Result res;
    try {
      res = abstraction.step(g.nodes_[u].box, key);
    } catch (const DivergenceError& e) {
      throw DivergenceError("divergence at node (" + key.to_string() + "): " + e.what());
    }
    {
      GraphNode& node = g.nodes_[u];
      node.expanded = true;
      node.delta = res.delta;
      node.branches = branch_set(res.delta, tau_alpha);
      node.transformer = res.transformer;
      node.output_block = res.output_block;
    }
    g.order_.push_back(u);

    const std::set<ControlState> states = g.nodes_[u].states;
    const std::vector<Decision> branches = g.nodes_[u].branches;
    for (const ControlState& st : states) {
      const std::vector<Decision> decisions =
          st.forced ? std::vector<Decision>{Decision::Accept} : branches;
      for (Decision d : decisions) {
        const auto tr = grid.next(key, st, d);
        const Box& moved = tr.edge == Decision::Decrease ? g.nodes_[u].box : res.output;
        const std::size_t v = g.get_or_create(tr.key, moved);
        if (!tr.key.terminal()) {
          g.nodes_[v].states.insert(tr.state);
          frontier.insert(tr.key);
        }
        if (!g.edge_between(u, v, tr.edge)) {
          g.edges_.push_back(GraphEdge{u, v, tr.edge});
          g.nodes_[u].out_edges.push_back(g.edges_.size() - 1);
          g.nodes_[v].in_edges.push_back(g.edges_.size() - 1);
        }
      }
    }
  }

  const double bound = node_count_bound(cfg);
  if (static_cast<double>(g.nodes_.size()) > bound) {
    throw Error("graph has " + std::to_string(g.nodes_.size()) + " nodes, above the bound " +
                format_double(bound));
  }
  return g;
}

TrajectoryGraph build_graph(const ModelSpec& model, const Box& region, const AbstractMode& mode) {
  RkStepAbstraction step(model.dynamics, model.solver, mode);
  return build_graph(step, model.solver, region);
}

StepKey processing_order(const std::vector<StepKey>& frontier) {
  if (frontier.empty()) throw Error("processing_order: empty frontier");
  return *std::min_element(frontier.begin(), frontier.end(), processed_before);
}

std::string export_dot(const TrajectoryGraph& graph) {
  std::vector<std::size_t> ids(graph.node_count());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    return processed_before(graph.node(a).key, graph.node(b).key);
  });
  std::vector<std::size_t> rank(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) rank[ids[i]] = i;

  std::ostringstream out;
  out << "digraph trajectory {\n";
  for (std::size_t id : ids) {
    const GraphNode& n = graph.node(id);
    out << "  n" << rank[id] << " [label=\"" << n.key.to_string()
        << " [width=" << format_double(n.box.total_width()) << "]\"];\n";
  }
  std::vector<std::size_t> edges(graph.edge_count());
  for (std::size_t i = 0; i < edges.size(); ++i) edges[i] = i;
  std::sort(edges.begin(), edges.end(), [&](std::size_t a, std::size_t b) {
    const GraphEdge& x = graph.edges()[a];
    const GraphEdge& y = graph.edges()[b];
    if (rank[x.from] != rank[y.from]) return rank[x.from] < rank[y.from];
    if (rank[x.to] != rank[y.to]) return rank[x.to] < rank[y.to];
    return x.label < y.label;
  });
  for (std::size_t e : edges) {
    const GraphEdge& edge = graph.edges()[e];
    out << "  n" << rank[edge.from] << " -> n" << rank[edge.to] << " [label=\""
        << decision_letter(edge.label) << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

bool contains_trajectory(const TrajectoryGraph& graph, const CasTrajectory& traj) {
  if (traj.keys.empty() || traj.keys.size() != traj.decisions.size() + 1) return false;
  if (!graph.find(traj.keys.front()) || *graph.find(traj.keys.front()) != graph.entry()) return false;
  for (std::size_t i = 0; i < traj.decisions.size(); ++i) {
    auto from = graph.find(traj.keys[i]);
    auto to = graph.find(traj.keys[i + 1]);
    if (!from || !to) return false;
    if (!graph.edge_between(*from, *to, traj.decisions[i])) return false;
  }
  return traj.keys.back().terminal();
}

std::vector<std::vector<std::size_t>> enumerate_paths(const TrajectoryGraph& graph, std::size_t limit) {
  std::vector<std::vector<std::size_t>> paths;
  std::vector<std::size_t> stack;
  std::function<void(std::size_t)> walk = [&](std::size_t u) {
    if (paths.size() >= limit) return;
    if (graph.node(u).key.terminal()) {
      paths.push_back(stack);
      return;
    }
    for (std::size_t e : graph.node(u).out_edges) {
      stack.push_back(e);
      walk(graph.edges()[e].to);
      stack.pop_back();
    }
  };
  walk(graph.entry());
  return paths;
}

}  // namespace gains
