#pragma once

#include "gains/abstract_domains.hpp"
#include "gains/model.hpp"
#include "gains/solver.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace gains {

/// Decisions some point of a region could trigger given its δ interval.
std::vector<Decision> branch_set(const Interval& delta, double tau_alpha);

/// Abstract solver step used to expand graph nodes.
class StepAbstraction {
 public:
  struct Result {
    Box output;
    Interval delta;
    std::shared_ptr<const CompositeTransformer> transformer;  // null when not recorded
    Index output_block = 0;
  };

  virtual ~StepAbstraction() = default;
  virtual Result step(const Box& box, const StepKey& key) const = 0;
  virtual Index state_dim() const = 0;
};

class RkStepAbstraction : public StepAbstraction {
 public:
  RkStepAbstraction(const Dynamics& dyn, const SolverConfig& cfg, AbstractMode mode);

  Result step(const Box& box, const StepKey& key) const override;
  Index state_dim() const override { return dyn_.state_dim; }
  const AbstractMode& mode() const { return mode_; }

 private:
  Dynamics dyn_;
  const Tableau* tab_;
  double tau_;
  AbstractMode mode_;
};

/// Keeps boxes unchanged and reports a δ interval chosen by a callback.
class ScriptedStepAbstraction : public StepAbstraction {
 public:
  using DeltaFn = std::function<Interval(const StepKey&)>;
  ScriptedStepAbstraction(Index dim, DeltaFn delta) : dim_(dim), delta_(std::move(delta)) {}

  Result step(const Box& box, const StepKey& key) const override;
  Index state_dim() const override { return dim_; }

 private:
  Index dim_;
  DeltaFn delta_;
};

/// The three-stage splitting example: h0 = 1/2, α = 2, t_end = 1.
SolverConfig splitting_config();
ScriptedStepAbstraction splitting_stub();

struct GraphEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  Decision label = Decision::Accept;
  bool identity() const { return label == Decision::Decrease; }
};

struct GraphNode {
  StepKey key;
  Box box;
  std::set<ControlState> states;
  bool expanded = false;
  Interval delta;
  std::vector<Decision> branches;
  std::shared_ptr<const CompositeTransformer> transformer;
  Index output_block = 0;
  std::vector<std::size_t> out_edges;
  std::vector<std::size_t> in_edges;
};

class TrajectoryGraph {
 public:
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const GraphNode& node(std::size_t i) const { return nodes_.at(i); }
  std::optional<std::size_t> find(const StepKey& key) const;

  std::size_t entry() const { return entry_; }
  std::size_t terminal() const;
  bool has_terminal() const { return find(terminal_key_).has_value(); }
  /// Nodes in the order they were expanded.
  const std::vector<std::size_t>& expansion_order() const { return order_; }

  std::optional<std::size_t> edge_between(std::size_t from, std::size_t to, Decision label) const;
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool has_transformers() const;

 private:
  friend TrajectoryGraph build_graph(const StepAbstraction&, const SolverConfig&, const Box&);

  std::size_t get_or_create(const StepKey& key, const Box& box);

  std::vector<GraphNode> nodes_;
  std::vector<GraphEdge> edges_;
  std::map<StepKey, std::size_t, StepKeyOrder> index_;
  std::vector<std::size_t> order_;
  std::size_t entry_ = 0;
  StepKey terminal_key_;
};

TrajectoryGraph build_graph(const StepAbstraction& step, const SolverConfig& cfg, const Box& region);
TrajectoryGraph build_graph(const ModelSpec& model, const Box& region, const AbstractMode& mode);

/// Frontier element expanded next: smallest t, then largest h.
StepKey processing_order(const std::vector<StepKey>& frontier);

/// Upper bound on the node count of any graph for this configuration.
double node_count_bound(const SolverConfig& cfg);

/// Graphviz text; nodes appear in processing order.
std::string export_dot(const TrajectoryGraph& graph);

/// True iff the concrete trajectory is a path of the graph with matching edge labels.
bool contains_trajectory(const TrajectoryGraph& graph, const CasTrajectory& traj);

/// All entry-to-terminal paths as edge index sequences, up to `limit` paths.
std::vector<std::vector<std::size_t>> enumerate_paths(const TrajectoryGraph& graph,
                                                      std::size_t limit = 100000);

}  // namespace gains
