#pragma once

#include "gains/core_math.hpp"
#include "gains/solver_config.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gains {

enum class LayerKind { Linear, Relu, ConcatTimeLinear };

std::string to_string(LayerKind kind);

/// One feed-forward layer. ConcatTimeLinear applies its map to [x; t].
class Layer {
 public:
  static Layer linear(Matrix weight, Vector bias);
  static Layer relu(Index dim);
  static Layer concat_time_linear(Matrix weight, Vector bias);

  LayerKind kind() const { return kind_; }
  const AffineMap& map() const { return map_; }
  Index in_dim() const;
  Index out_dim() const;
  bool uses_time() const { return kind_ == LayerKind::ConcatTimeLinear; }

  /// Affine part with the time column folded into the offset.
  AffineMap at_time(double t) const;

  Vector eval(const Vector& x, std::optional<double> time) const;

  bool operator==(const Layer&) const = default;

 private:
  Layer(LayerKind kind, AffineMap map, Index relu_dim)
      : kind_(kind), map_(std::move(map)), relu_dim_(relu_dim) {}

  LayerKind kind_;
  AffineMap map_;
  Index relu_dim_ = 0;
};

using LayerStack = std::vector<Layer>;

/// Checks consecutive dims; returns the output dim (or `input_dim` for an empty stack).
Index validate_stack(const LayerStack& layers, Index input_dim, const std::string& what);
bool stack_uses_time(const LayerStack& layers);

/// Exact concrete forward pass.
Vector eval_layers(const LayerStack& layers, const Vector& input, std::optional<double> time);

using VectorField = std::function<Vector(double t, const Vector& z)>;

/// Network g(z, t) defining dz/dt.
struct Dynamics {
  LayerStack layers;
  Index state_dim = 0;

  Dynamics() = default;
  Dynamics(LayerStack layers, Index state_dim);

  Vector eval(const Vector& z, double t) const;
  VectorField field() const;

  bool operator==(const Dynamics&) const = default;
};

enum class OutputRole { Classification, Regression };

struct ModelSpec {
  LayerStack encoder;
  Dynamics dynamics;
  LayerStack decoder;
  SolverConfig solver;
  OutputRole output = OutputRole::Classification;

  Index input_dim() const;
  Index state_dim() const { return dynamics.state_dim; }
  Index output_dim() const;

  /// Throws gains::Error naming the violated invariant.
  void validate() const;

  bool operator==(const ModelSpec&) const = default;
};

/// Parse errors carry the JSON path of the offending field.
class ModelFormatError : public Error {
 public:
  using Error::Error;
};

ModelSpec model_from_json(const std::string& text);
std::string model_to_json(const ModelSpec& model);
ModelSpec load_model(const std::filesystem::path& path);
void save_model(const ModelSpec& model, const std::filesystem::path& path);

/// Small random model for testing: linear encoder, dynamics
/// concat_time_linear -> relu -> linear, linear decoder.
struct RandomModelOptions {
  Index input_dim = 4;
  Index state_dim = 4;
  Index hidden_dim = 8;
  Index output_dim = 3;  // ignored for regression, which reconstructs the input
  OutputRole output = OutputRole::Classification;
  double dynamics_scale = 0.5;
  SolverConfig solver;
};

SolverConfig default_test_solver();

ModelSpec random_model(const RandomModelOptions& opts, std::uint64_t seed);

}  // namespace gains
