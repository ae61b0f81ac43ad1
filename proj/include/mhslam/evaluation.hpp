#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mhslam/ambiguity_sim.hpp"
#include "mhslam/dataset_io.hpp"
#include "mhslam/shape_metrics.hpp"
#include "mhslam/solver.hpp"

namespace mhslam {

enum class StrategyKind { MaxMixture, Average, RandomSelect };

/// "maxmix", "average" or "random".
std::string to_string(StrategyKind s);
/// Throws InvalidInput on an unknown name.
StrategyKind parse_strategy(const std::string& name);

inline constexpr StrategyKind kAllStrategies[] = {StrategyKind::MaxMixture, StrategyKind::Average,
                                                   StrategyKind::RandomSelect};

/// Arithmetic mean translation and chordal-L2 mean rotation: the principal
/// eigenvector of sum_j w_j q_j q_j^T over hemisphere-normalized quaternions.
/// When the top eigenvalue is repeated the weighted quaternion sum is
/// projected onto its eigenspace.
Pose3 baseline_average(const HypothesisSet& h);

/// A uniformly drawn member.
Pose3 baseline_random(const HypothesisSet& h, std::mt19937_64& rng);

/**
 * Replaces every mixture factor by a single-component factor holding the
 * collapsed hypothesis (MaxMixture returns the dataset unchanged). Random
 * draws are made in factor order from a generator seeded with `seed`.
 */
Dataset collapse_hypotheses(const Dataset& dataset, StrategyKind strategy, std::uint64_t seed);

struct ErrorReport {
  /// Running means over frames of the online estimate of each frame's pose.
  std::vector<double> rot_err_deg_running;
  std::vector<double> trans_err_m_running;
  /// Mean chordal error of the landmarks estimated so far, per timestep
  /// (0 before the first landmark appears).
  std::vector<double> mean_landmark_chordal;
  /// Chordal error of every landmark in the final estimate, by landmark
  /// index.
  std::vector<std::pair<std::uint32_t, double>> final_landmark_chordal;
  double final_mean_landmark_chordal = 0.0;
  /// Over all robot poses of the final estimate, no alignment.
  double trajectory_rmse = 0.0;
};

/// Running mean of a sequence.
std::vector<double> running_mean(std::span<const double> values);

/**
 * `per_step[k]` must hold robot k, and the final step every groundtruth
 * robot; every estimated landmark must have a groundtruth pose. Throws
 * InvalidInput otherwise.
 */
ErrorReport evaluate_run(const std::vector<GraphValues>& per_step, const GraphValues& groundtruth);

struct StrategyRun {
  StrategyKind strategy = StrategyKind::MaxMixture;
  std::uint64_t seed = 0;
  /// FNV-1a of the serialized dataset handed to the strategy.
  std::uint64_t input_checksum = 0;
  ErrorReport report;
};

/// Solves a dataset with one strategy and scores it.
StrategyRun run_strategy(const Dataset& dataset, const GraphValues& groundtruth, StrategyKind strategy,
                         std::uint64_t seed, const SolverConfig& solver = {});

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

/// Linear interpolation between order statistics (h = (n - 1) p). Throws
/// InvalidInput on an empty sample.
Quartiles quartiles(std::vector<double> sample);

struct StrategySummary {
  StrategyKind strategy = StrategyKind::MaxMixture;
  Quartiles final_mean_landmark_chordal;
  Quartiles trajectory_rmse;
  Quartiles final_rot_err_deg;
  Quartiles final_trans_err_m;
};

struct ComparisonTable {
  /// Seed-major, strategies in kAllStrategies order.
  std::vector<StrategyRun> runs;
  std::vector<StrategySummary> summary;
};

/**
 * Simulates every seed once and runs all three strategies on that single
 * dataset. Throws Error if the strategies did not receive identical input.
 */
ComparisonTable compare_strategies(const SimConfig& config, std::span<const std::uint64_t> seeds,
                                   const SolverConfig& solver = {});

/// `<prefix>_running.csv` and `<prefix>_landmarks.csv`.
void write_report_csv(const ErrorReport& report, const std::string& prefix);

/**
 * Per run `<prefix>_<strategy>_seed<S>_{running,landmarks}.csv`, plus
 * `<prefix>_runs.csv` (one row per run) and `<prefix>_summary.csv`
 * (quartiles per strategy and metric).
 */
void write_comparison(const ComparisonTable& table, const std::string& prefix);

}  // namespace mhslam
