#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace gains {

enum class TableauId { Euler, Dopri5, Dopri8 };

std::string to_string(TableauId id);
TableauId tableau_from_string(const std::string& name);

/// Step-size control parameters shared by the concrete and abstract solvers.
struct SolverConfig {
  int alpha = 2;            // update factor, integer > 1
  double tau = 0.005;       // absolute error tolerance
  double h_min = 0.02;      // minimum step size
  double eta = 0.1;         // initial step size (EMA of training-time proposals)
  double beta = 0.1;        // EMA momentum
  double t_end = 1.0;
  int order = 5;            // p in tau_alpha = alpha^-p
  int max_rejections_after_clip = 2;
  TableauId tableau = TableauId::Dopri5;
  std::optional<std::int64_t> max_steps;  // defaults to 10 * t_end / h_min

  double tau_alpha() const;
  std::int64_t step_cap() const;
  /// Throws gains::Error naming the violated invariant.
  void validate() const;

  bool operator==(const SolverConfig&) const = default;
};

}  // namespace gains
