#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mhslam/pose3.hpp"

namespace mhslam {

/// Named point set in the object frame, meters.
struct ObjectModel {
  int id = 0;
  std::string name;
  std::vector<Vector3> points;
};

/// True when the model has at least 4 finite points that do not all lie on
/// one plane, i.e. pose errors are observable through the point set.
bool is_discriminative(const ObjectModel& model);

/// Reads `x y z` triples, one per line, `#` starting a comment.
ObjectModel read_xyz_model(std::istream& in, int id = 0, std::string name = {});
ObjectModel load_xyz_model(const std::string& path, int id = 0);

/// N candidate poses of one object (object in camera frame) with weights
/// that sum to one.
class HypothesisSet {
 public:
  /// Uniform weights 1/N.
  HypothesisSet(int object_id, std::vector<Pose3> hypotheses);
  /// Weights must be nonnegative with a positive sum; they are normalized.
  HypothesisSet(int object_id, std::vector<Pose3> hypotheses, std::vector<double> weights);

  int object_id() const { return object_id_; }
  std::size_t size() const { return hypotheses_.size(); }
  const std::vector<Pose3>& hypotheses() const { return hypotheses_; }
  const std::vector<double>& weights() const { return weights_; }
  const Pose3& operator[](std::size_t i) const { return hypotheses_[i]; }

  friend bool operator==(const HypothesisSet&, const HypothesisSet&) = default;

 private:
  int object_id_;
  std::vector<Pose3> hypotheses_;
  std::vector<double> weights_;
};

enum class PoseMetric { Add, AddS };

struct MetricOptions {
  /// ADD-S evaluates at most this many model points (uniform stride
  /// subsampling above the cap).
  std::size_t adds_point_cap = 512;
};

/// Mean distance between corresponding model points under the two poses.
double add_error(const Pose3& est, const Pose3& gt, const ObjectModel& model);

/// Mean distance from each estimate-transformed point to its nearest
/// groundtruth-transformed point.
double adds_error(const Pose3& est, const Pose3& gt, const ObjectModel& model,
                  const MetricOptions& options = {});

double pose_error(PoseMetric metric, const Pose3& est, const Pose3& gt, const ObjectModel& model,
                  const MetricOptions& options = {});

struct BestHypothesis {
  std::size_t index = 0;
  double error = 0.0;
};

/// Winner-takes-all: the member with the smallest metric value, lowest index
/// on ties.
BestHypothesis best_hypothesis(const HypothesisSet& hyps, const Pose3& gt, const ObjectModel& model,
                               PoseMetric metric, const MetricOptions& options = {});

/// Area under the accuracy-vs-threshold curve on [0, threshold], normalized
/// to [0, 1]: mean of 1 - min(e, threshold) / threshold.
double auc(std::span<const double> errors, double threshold = 0.10);

}  // namespace mhslam
