#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mhslam/ambiguity_sim.hpp"
#include "mhslam/factor_graph.hpp"
#include "mhslam/solver.hpp"

namespace mhslam {

/**
 * Line-oriented dataset, one record per line, `#` starting a comment:
 *
 *   VERTEX_SE3:QUAT <id> <tx ty tz qx qy qz qw>
 *   EDGE_SE3:QUAT <id_i> <id_j> <tx ty tz qx qy qz qw> <21 info entries>
 *   MM_EDGE_SE3:QUAT <robot> <landmark> <N> <(tx ty tz qx qy qz qw) x N> <21 info entries>
 *
 * Information entries are the upper triangle, row-major, in [rot | trans]
 * ordering. Ids below kLandmarkIdOffset are robot poses; ids at or above it
 * are landmarks `id - kLandmarkIdOffset`.
 */
struct Dataset {
  GraphValues values;
  FactorGraph graph;

  friend bool operator==(const Dataset&, const Dataset&);
};

/// Throws ParseError (with the 1-based line number) on malformed or unknown
/// records and ValidationError on a non-SPD information block.
Dataset parse_dataset(std::istream& in);
Dataset parse_dataset(const std::string& text);

/// Vertices first, then factors, both in insertion order, with 17
/// significant digits. Throws InvalidInput for factors the grammar cannot
/// express (priors, single landmark edges, weighted mixtures).
std::string serialize_dataset(const FactorGraph& graph, const GraphValues& values);

std::uint32_t file_id(const VariableKey& key);
VariableKey key_from_file_id(std::uint64_t id);

/// Dead-reckoned robot vertices, odometry edges and one mixture edge per
/// observation, in frame order.
Dataset dataset_from_simulation(const SimOutput& sim);

/// Groundtruth robot and object poses as VERTEX records.
GraphValues groundtruth_values(const SimOutput& sim);

/// Information of the gauge-fixing prior placed on robot 0 when solving a
/// dataset.
Information anchor_information();

/**
 * Splits a dataset into timesteps: step k holds the odometry edges ending at
 * robot k and the mixture edges observed from robot k, in file order. Robot
 * 0 is anchored at its VERTEX value. Throws InvalidInput when robot ids are
 * not contiguous from 0 or robot 0 has no vertex.
 */
IncrementalProblem make_incremental_problem(const Dataset& dataset);

/// Estimates after each step: `STEP <k>` headers each followed by VERTEX
/// records of the step's latest robot pose and every landmark estimated so
/// far. The final step lists every variable.
void write_estimates(std::ostream& out, const std::vector<GraphValues>& per_step);
std::vector<GraphValues> read_estimates(std::istream& in);

/// `%.17g`.
std::string format_double(double v);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace mhslam
