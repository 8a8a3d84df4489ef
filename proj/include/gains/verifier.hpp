#pragma once

#include "gains/abstract_domains.hpp"
#include "gains/model.hpp"
#include "gains/trajectory_graph.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace gains {

/// Rewrites a bound on the terminal state as a bound on the entry state by
/// sweeping the graph backwards. Where several edges leave a node the
/// arriving bounds are merged with CURLS over the node box.
struct GraphBacksubResult {
  LinearBounds bounds;    // over the entry node frame
  std::int64_t merges = 0;  // number of nodes where CURLS was applied
};

GraphBacksubResult graph_backsubstitute(const TrajectoryGraph& graph, const LinearBounds& query);

enum class Method { Gains, Box, Linear };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct ClassificationSpec {
  Index target = 0;
};

struct RegressionSpec {
  double nu = 0.1;
  double delta_tol = 0.01;
  std::optional<double> reference_mae;  // computed from the clean input when absent
  std::vector<bool> mask;               // observed features, all when empty
};

struct RobustnessSpec {
  std::optional<ClassificationSpec> classification;
  std::optional<RegressionSpec> regression;
  double epsilon = 0.0;
  std::optional<Interval> clamp;

  static RobustnessSpec cls(Index target, double eps);
  static RobustnessSpec reg(double nu, double delta_tol, double eps);
  void validate() const;
};

enum class Status { Verified, Unknown, Falsified };

std::string to_string(Status s);

/// Output bounds of one abstract pipeline.
struct OutputBounds {
  Box output;                         // certified output box
  std::optional<Vector> margin_lower; // classification: lower bound of y_t - y_i (entry t unused)
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::int64_t merges = 0;
};

/// Certified output bounds of the model over `region` (already clamped input box).
OutputBounds certify(const ModelSpec& model, const Box& region, Method method,
                     std::optional<Index> target = std::nullopt);

struct Verdict {
  Status status = Status::Unknown;
  std::optional<Vector> witness;
  double bound = 0.0;  // min margin lower bound, or certified MAE upper bound
  double threshold = 0.0;
  std::optional<OutputBounds> bounds;
  double millis = 0.0;
  std::string diagnostic;
};

struct VerifyOptions {
  std::int64_t samples = 0;  // random points searched for a counterexample when not verified
  std::uint64_t seed = 0;
};

Box input_region(const Vector& x, const RobustnessSpec& spec);

/// Mean absolute error over the mask between a model output and the clean input.
double masked_mae(const Vector& output, const Vector& target, const std::vector<bool>& mask);

/// Worst-case masked MAE over an output box.
double mae_upper_bound(const Box& output, const Vector& target, const std::vector<bool>& mask);

Verdict verify(const ModelSpec& model, const Vector& input, const RobustnessSpec& spec,
               Method method, const VerifyOptions& opts = {});

struct SoundnessSample {
  std::int64_t samples = 0;
  std::int64_t violations = 0;
  double max_violation = 0.0;     // largest distance outside the certified bounds
  double mean_gap = 0.0;          // mean distance from samples to the nearest bound, summed over outputs
  std::optional<Vector> witness;  // first violating input
};

/// Samples the clamped ε-ball and checks every concrete output against the certified bounds.
SoundnessSample empirical_soundness(const ModelSpec& model, const Vector& input, double epsilon,
                                    std::int64_t n_samples, std::uint64_t seed,
                                    Method method = Method::Gains,
                                    std::optional<Interval> clamp = std::nullopt,
                                    double tol = 1e-9);

/// Result CSV: input_id,method,epsilon,status,margin_or_mae_bound,graph_nodes,graph_edges,millis
void write_result_header(std::ostream& out);
void write_result_row(std::ostream& out, std::size_t input_id, Method method, double epsilon,
                      const Verdict& v);

}  // namespace gains
