#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mhslam/shape_metrics.hpp"
#include "mhslam/solver.hpp"

namespace mhslam {

/// Solver settings of the experiment pipeline: the library defaults with a
/// relative tolerance of 1e-6, which stops the slow tail of Gauss-Newton
/// steps on large-residual graphs.
SolverConfig experiment_solver_config();

/// "1,2,3" lists seeds; a single integer K means seeds 1..K. Throws
/// InvalidInput on anything else.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

struct PosePair {
  Pose3 estimate;
  Pose3 groundtruth;
};

/// One pair per line: estimate then groundtruth, each `tx ty tz qx qy qz qw`.
/// Throws ParseError on malformed lines.
std::vector<PosePair> read_pose_pairs(std::istream& in);

}  // namespace mhslam
