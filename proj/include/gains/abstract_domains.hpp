#pragma once

#include "gains/core_math.hpp"
#include "gains/model.hpp"
#include "gains/solver.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gains {

/// Lower slope choice for unstable ReLUs.
enum class ReluPolicy { AreaMin, AllZero, AllOne };

std::string to_string(ReluPolicy p);

/// y ≥ lambda·x and y ≤ upper_slope·x + upper_offset over [l, u].
struct ReluRelaxation {
  double lambda = 0.0;
  double upper_slope = 0.0;
  double upper_offset = 0.0;
};

/// Requires l < u.
ReluRelaxation relu_relaxation(double l, double u, ReluPolicy policy);

/// Interval image of one layer. ConcatTimeLinear treats `time` as one more input coordinate.
Box ibp_layer(const Layer& layer, const Box& input, std::optional<Interval> time);
Box ibp_layers(const LayerStack& layers, Box input, std::optional<Interval> time);

enum class Side { Lower, Upper };

/// Affine lower/upper bounds on a block's neurons over some reference frame,
/// together with the concrete box they imply.
struct LinearBounds {
  AffineMap lower;
  AffineMap upper;
  Box box;

  static LinearBounds identity(const Box& frame);
};

/// Interval concretization of both maps over `input`.
Box concretize(const LinearBounds& bounds, const Box& input);

/// A DAG of affine and ReLU blocks over one input frame (block 0).
///
/// Every block caches a concrete box: interval propagation from its sources,
/// met with the concretization of its linear bounds over the input frame
/// when linear refinement is enabled. ReLU relaxations use the cached box of
/// their source.
class CompositeTransformer {
 public:
  struct Term {
    Index src;
    double scale = 1.0;             // used when matrix is empty: scale·I
    std::optional<Matrix> matrix;
  };

  CompositeTransformer(Box input, bool linear, ReluPolicy policy = ReluPolicy::AreaMin);

  std::size_t size() const { return blocks_.size(); }
  Index dim(Index block) const { return blocks_.at(block).box.dim(); }
  const Box& box(Index block) const { return blocks_.at(block).box; }
  const Box& input_box() const { return blocks_.front().box; }
  bool linear() const { return linear_; }
  ReluPolicy policy() const { return policy_; }

  Index add_affine(std::vector<Term> terms, Vector offset);
  Index add_relu(Index src);
  /// Appends a layer stack; ConcatTimeLinear layers are evaluated at the fixed time `t`.
  Index add_layers(Index src, const LayerStack& layers, std::optional<double> t);

  /// Tightens the cached box of `block` with its linear bounds over the input.
  void refine(Index block);

  /// Rewrites `query`, a map over block `target`, as a map over the input
  /// frame that bounds it from the given side.
  AffineMap backsubstitute(Index target, const AffineMap& query, Side side) const;
  LinearBounds backsubstitute(Index target, const LinearBounds& query) const;

  /// Concrete evaluation of every block on a point of the input frame.
  std::vector<Vector> evaluate(const Vector& input) const;

 private:
  enum class Kind { Input, Affine, Relu };
  struct Block {
    Kind kind;
    std::vector<Term> terms;
    Vector offset;
    Index src = -1;
    Vector lambda, slope, intercept;  // ReLU relaxation per neuron
    Box box;
  };

  Box interval_of(const Block& b) const;

  std::vector<Block> blocks_;
  bool linear_;
  ReluPolicy policy_;
};

enum class DomainKind { Box, Linear };

struct AbstractMode {
  DomainKind kind = DomainKind::Box;
  ReluPolicy policy = ReluPolicy::AreaMin;

  static AbstractMode box() { return {DomainKind::Box, ReluPolicy::AreaMin}; }
  static AbstractMode linear(ReluPolicy p) { return {DomainKind::Linear, p}; }
  std::string to_string() const;
};

/// One abstract solver step, recorded as a composite transformer over the
/// step's entry box.
struct AbstractStep {
  std::shared_ptr<const CompositeTransformer> transformer;
  Index output = 0;  // block holding z_hat1
  Index error = 0;   // block holding z_hat1 - z_hat2
  Interval delta;

  const Box& output_box() const { return transformer->box(output); }
  const Box& error_box() const { return transformer->box(error); }
};

AbstractStep abstract_rk_step(const Dynamics& dyn, const Box& node_box, double t, double h,
                              const Tableau& tab, const AbstractMode& mode, double tau);

/// Elementwise tightest bounds across sound boxes for the same quantity.
Box combined_bounds(const std::vector<Box>& boxes);

}  // namespace gains
