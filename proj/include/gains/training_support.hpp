#pragma once

#include "gains/solver.hpp"
#include "gains/trajectory_graph.hpp"

#include <cstdint>
#include <vector>

namespace gains {

/// g(d) = 0, g(a) = 1, g(i) = 2.
int update_weight(Decision d);

/// Index of the reference vertex closest to `key` in ℓ1 distance over (t, h).
std::size_t reference_vertex(const StepKey& key, const CasTrajectory& reference);

/// Σ over path vertices of g(u(v)) - g(u'(v')).
int location_index(const std::vector<StepKey>& keys, const std::vector<Decision>& updates,
                   const CasTrajectory& reference);

struct UpdateProbabilities {
  double p_d = 0.0;
  double p_a = 0.0;
  double p_i = 0.0;

  double of(Decision d) const;
  double sum() const { return p_d + p_a + p_i; }
};

UpdateProbabilities update_probabilities(int n, Decision ref_update, double q1, double q2);

struct SampleConfig {
  std::size_t kappa = 4;
  double q1 = 0.15;
  double q2 = 0.15;
  std::uint64_t seed = 0;
  CasTrajectory reference;
  std::int64_t max_steps = 100000;

  void validate() const;
};

struct SampledPath {
  std::vector<StepKey> keys;        // ends at the terminal key
  std::vector<Decision> decisions;  // edge labels
  Box final_box;
  int location = 0;
};

struct SampleResult {
  std::vector<SampledPath> paths;
  std::size_t checkpoints = 0;
  std::int64_t steps = 0;
};

/// Follows single abstract trajectories, sampling an update at every split
/// and revisiting stored branching points until κ paths are collected or no
/// untaken branch remains. Paths are pairwise distinct.
SampleResult sample_trajectories(const StepAbstraction& step, const SolverConfig& cfg,
                                 const Box& region, const SampleConfig& sc);

/// Edge-index path of a graph as a trajectory.
CasTrajectory path_trajectory(const TrajectoryGraph& graph, const std::vector<std::size_t>& edges);

/// (1 - ω₁ε'/ε_t)·L_std + (ω₁ε'/ε_t)·L_rob + ω₂·‖widths‖₁
double robust_loss_value(double std_loss, double rob_loss, const Vector& widths, double eps_prime,
                         double eps_t, double w1, double w2);

/// Polynomial (power 4) ramp up to the knee at e_start + mid·(e_end - e_start), then linear to eps_t.
double smooth_schedule(double eps_t, double e_start, double e_end, double mid, double epoch);

double sin_schedule(double q_start, double q_end, double e1, double e2, double epoch);

}  // namespace gains
