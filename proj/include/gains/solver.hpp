#pragma once

#include "gains/core_math.hpp"
#include "gains/model.hpp"
#include "gains/rational.hpp"
#include "gains/solver_config.hpp"

#include <compare>
#include <optional>
#include <string>
#include <vector>

namespace gains {

/// Butcher tableau of an (optionally embedded) explicit Runge-Kutta pair.
///
/// `b` produces the propagated solution z_hat1. For embedded pairs `e` holds
/// the weights of z_hat1 - z_hat2, so the error estimate never suffers from
/// cancellation between two nearly equal solutions.
struct Tableau {
  TableauId id;
  int order;
  std::vector<double> c;
  std::vector<std::vector<double>> a;  // row i has i entries
  std::vector<double> b;
  std::vector<double> e;               // empty for single methods

  std::size_t stages() const { return c.size(); }
  bool embedded() const { return !e.empty(); }
};

const Tableau& tableau(TableauId id);

struct StepResult {
  Vector z_hat1;
  std::optional<Vector> z_hat2;
  Vector error;  // z_hat1 - z_hat2, zero for single methods
};

StepResult rk_step(const VectorField& g, const Vector& z, double t, double h, const Tableau& tab);
StepResult rk_step(const Dynamics& dyn, const Vector& z, double t, double h, TableauId id);

/// δ = ‖error‖₁ / τ, accumulated exactly as `l1_interval_norm` does.
double error_ratio(const Vector& error, double tau);

enum class Decision { Increase, Accept, Decrease };

char decision_letter(Decision d);
std::string to_string(Decision d);

Decision cas_decide(double delta, double tau_alpha);

/// Solver state (t, h). The terminal state is (t_end, 0).
struct StepKey {
  Rational t;
  Rational h;

  bool terminal() const { return h.is_zero(); }
  std::string to_string() const;

  bool operator==(const StepKey&) const = default;
};

/// Processing order: time ascending, then step size descending.
bool processed_before(const StepKey& a, const StepKey& b);

struct StepKeyOrder {
  bool operator()(const StepKey& a, const StepKey& b) const { return processed_before(a, b); }
};

/// Per-trajectory controller bookkeeping that is not visible in (t, h).
struct ControlState {
  bool forced = false;   // degenerate mode: accept every step at fixed h
  bool clipped = false;  // the current step was shortened to reach t_end
  int clip_rejections = 0;

  auto operator<=>(const ControlState&) const = default;
};

/// Exact step-grid arithmetic derived from a SolverConfig.
class StepGrid {
 public:
  explicit StepGrid(const SolverConfig& cfg);

  const Rational& t_end() const { return t_end_; }
  int alpha() const { return alpha_; }

  StepKey entry_key() const;
  ControlState entry_state() const;
  StepKey terminal_key() const { return {t_end_, Rational()}; }

  struct Transition {
    StepKey key;
    ControlState state;
    Decision edge;  // label of the taken edge; a forced accept reports Accept
  };

  /// Successor of `key` in `state` under the controller decision `d`.
  Transition next(const StepKey& key, const ControlState& state, Decision d) const;

 private:
  /// Builds (t, h) with h clipped to the remaining time.
  std::pair<StepKey, bool> clip(const Rational& t, const Rational& h) const;
  /// Largest h0·α^k strictly below `h`.
  Rational grid_below(const Rational& h) const;

  Rational t_end_;
  Rational h0_;
  Rational h_min_;
  int alpha_;
  int max_clip_rejections_;
};

struct CasTrajectory {
  std::vector<StepKey> keys;       // every attempted state, ending with the terminal key
  std::vector<Decision> decisions; // edge taken out of keys[i]
};

struct CasResult {
  Vector z_final;
  CasTrajectory trajectory;
  std::int64_t steps() const { return static_cast<std::int64_t>(trajectory.decisions.size()); }
};

/// Controlled adaptive integration from t = 0 to cfg.t_end starting at h = cfg.eta.
CasResult cas_integrate(const VectorField& g, const Vector& z0, const SolverConfig& cfg);
CasResult cas_integrate(const Dynamics& dyn, const Vector& z0, const SolverConfig& cfg);

struct AsResult {
  Vector z_final;
  std::int64_t accepted = 0;
  std::int64_t attempted = 0;
};

/// Step-size factor δ^(-1/p), limited to [0.2, 10].
double as_step_factor(double delta, int order);

/// Standard adaptive integration h ← h·δ^(-1/p) with reject-and-retry when δ > 1.
AsResult as_integrate(const VectorField& g, const Vector& z0, const SolverConfig& cfg);
AsResult as_integrate(const Dynamics& dyn, const Vector& z0, const SolverConfig& cfg);

/// Two-case proposal h̃₀ from ‖z₀‖₁ and ‖g(0, z₀)‖₁.
double proposal_initial_step(double z0_norm, double g0_norm, double gamma);

/// h̃₀ followed by one multiplicative update from a probe step (no retry).
double initial_step_proposal(const VectorField& g, const Vector& z0, double gamma,
                             const SolverConfig& cfg);

double ema_update(double eta, double h0, double beta);

/// Model forward pass: encoder, CAS integration, decoder.
struct ForwardResult {
  Vector z0;
  CasResult solve;
  Vector output;
};

ForwardResult forward(const ModelSpec& model, const Vector& input);

}  // namespace gains
