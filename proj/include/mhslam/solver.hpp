#pragma once

#include <cstddef>
#include <vector>

#include "mhslam/factor_graph.hpp"

namespace mhslam {

struct SolverConfig {
  int max_iterations = 100;
  double initial_damping = 1e-4;
  double damping_up = 10.0;
  double damping_down = 0.5;
  /// Converged when an accepted step lowers the error by less than this.
  double convergence_tol_abs = 1e-8;
  /// ... or by less than this fraction of the current error.
  double convergence_tol_rel = 1e-10;
  /// Damping increases tried per iteration before giving up.
  int max_inner_retries = 10;

  /// Throws InvalidInput when a field is out of range.
  void validate() const;
};

struct SolveStats {
  int iterations = 0;
  double initial_error = 0.0;
  double final_error = 0.0;
  /// Error at the initial estimate followed by the error after every
  /// accepted step; nonincreasing.
  std::vector<double> error_history;
  /// Active component of every max-mixture factor (insertion order) at the
  /// estimate matching each error_history entry. The last row is the
  /// assignment at the returned solution.
  std::vector<std::vector<std::size_t>> active_components;
  bool converged = false;
};

struct SolveResult {
  GraphValues values;
  SolveStats stats;
};

/**
 * Levenberg-Marquardt on the pose manifold. Every iteration reselects the
 * active component of each max-mixture factor at the current estimate,
 * linearizes, solves the damped sparse normal equations and retracts with
 * x <- exp(d) * x. A step is kept only if the total error decreases.
 *
 * Throws GaugeError when the graph has no prior, a variable has no factor, or
 * the normal equations stay singular through every damping retry; throws
 * MissingVariable when a factor key has no initial value.
 */
SolveResult optimize(const FactorGraph& graph, const GraphValues& initial, const SolverConfig& config = {});

/// Factors and variables arriving at one timestep.
struct Timestep {
  std::vector<OdometryFactor> odometry;
  std::vector<MaxMixtureFactor> observations;
};

struct IncrementalProblem {
  /// Gauge-fixing prior on the first robot pose.
  VariableKey anchor_key = VariableKey::robot(0);
  Pose3 anchor;
  Information anchor_information;
  std::vector<Timestep> steps;
};

struct IncrementalResult {
  /// Solution after each timestep.
  std::vector<GraphValues> per_step;
  std::vector<SolveStats> stats;
  FactorGraph graph;
};

/**
 * Replays a stream with a warm-started batch optimize() after every timestep.
 * New robot poses are initialized by composing the odometry measurement onto
 * the current estimate of its source pose; a new landmark takes the
 * hypothesis of its first observation whose implied landmark pose best fits
 * all of this timestep's observations of it (index 0 when tied), composed
 * with the current robot estimate.
 *
 * After each solve, every landmark observed in the timestep is tried at the
 * poses implied by this timestep's hypotheses (robots held fixed). If one
 * lowers the summed cost of the landmark's factors, the landmark jumps there
 * and the step is solved again; `stats` then holds the second solve.
 */
IncrementalResult incremental_solve(const IncrementalProblem& problem, const SolverConfig& config = {});

}  // namespace mhslam
