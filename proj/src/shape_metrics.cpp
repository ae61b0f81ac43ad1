#include "mhslam/shape_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "mhslam/errors.hpp"

namespace mhslam {

namespace {

void require_nonempty(const ObjectModel& model) {
  if (model.points.empty()) {
    throw InvalidInput("object model '" + model.name + "' has no points");
  }
}

std::vector<Vector3> transform_points(const Pose3& pose, std::span<const Vector3> points) {
  const Matrix3 r = pose.rotation_matrix();
  std::vector<Vector3> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    out.push_back(r * p + pose.translation());
  }
  return out;
}

}  // namespace

bool is_discriminative(const ObjectModel& model) {
  if (model.points.size() < 4) {
    return false;
  }
  Vector3 centroid = Vector3::Zero();
  for (const auto& p : model.points) {
    if (!p.allFinite()) {
      return false;
    }
    centroid += p;
  }
  centroid /= static_cast<double>(model.points.size());
  Matrix3 scatter = Matrix3::Zero();
  for (const auto& p : model.points) {
    scatter += (p - centroid) * (p - centroid).transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Matrix3> eig(scatter);
  const double largest = eig.eigenvalues()(2);
  return largest > 0.0 && eig.eigenvalues()(0) > 1e-12 * largest;
}

ObjectModel read_xyz_model(std::istream& in, int id, std::string name) {
  ObjectModel model{id, std::move(name), {}};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream fields(line);
    double x = 0, y = 0, z = 0;
    if (!(fields >> x)) {
      continue;  // blank or comment-only
    }
    std::string extra;
    if (!(fields >> y >> z) || (fields >> extra)) {
      throw ParseError(line_no, "expected exactly three coordinates");
    }
    const Vector3 p(x, y, z);
    if (!p.allFinite()) {
      throw ParseError(line_no, "non-finite coordinate");
    }
    model.points.push_back(p);
  }
  require_nonempty(model);
  return model;
}

ObjectModel load_xyz_model(const std::string& path, int id) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidInput("cannot open model file: " + path);
  }
  return read_xyz_model(in, id, path);
}

HypothesisSet::HypothesisSet(int object_id, std::vector<Pose3> hypotheses)
    : object_id_(object_id), hypotheses_(std::move(hypotheses)) {
  if (hypotheses_.empty()) {
    throw InvalidInput("hypothesis set must hold at least one pose");
  }
  weights_.assign(hypotheses_.size(), 1.0 / static_cast<double>(hypotheses_.size()));
}

HypothesisSet::HypothesisSet(int object_id, std::vector<Pose3> hypotheses, std::vector<double> weights)
    : object_id_(object_id), hypotheses_(std::move(hypotheses)), weights_(std::move(weights)) {
  if (hypotheses_.empty()) {
    throw InvalidInput("hypothesis set must hold at least one pose");
  }
  if (weights_.size() != hypotheses_.size()) {
    throw InvalidInput("hypothesis/weight count mismatch");
  }
  double sum = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidInput("hypothesis weights must be finite and nonnegative");
    }
    sum += w;
  }
  if (!(sum > 0.0)) {
    throw InvalidInput("hypothesis weights sum to zero");
  }
  for (double& w : weights_) {
    w /= sum;
  }
}

double add_error(const Pose3& est, const Pose3& gt, const ObjectModel& model) {
  require_nonempty(model);
  const Matrix3 re = est.rotation_matrix();
  const Matrix3 rg = gt.rotation_matrix();
  double sum = 0.0;
  for (const auto& x : model.points) {
    sum += ((re * x + est.translation()) - (rg * x + gt.translation())).norm();
  }
  return sum / static_cast<double>(model.points.size());
}

double adds_error(const Pose3& est, const Pose3& gt, const ObjectModel& model,
                  const MetricOptions& options) {
  require_nonempty(model);
  std::span<const Vector3> points(model.points);
  std::vector<Vector3> subsampled;
  if (options.adds_point_cap > 0 && points.size() > options.adds_point_cap) {
    const std::size_t stride = (points.size() + options.adds_point_cap - 1) / options.adds_point_cap;
    for (std::size_t i = 0; i < points.size(); i += stride) {
      subsampled.push_back(points[i]);
    }
    points = subsampled;
  }
  const auto from = transform_points(est, points);
  const auto to = transform_points(gt, points);
  double sum = 0.0;
  for (const auto& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to) {
      best = std::min(best, (a - b).squaredNorm());
    }
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(from.size());
}

double pose_error(PoseMetric metric, const Pose3& est, const Pose3& gt, const ObjectModel& model,
                  const MetricOptions& options) {
  return metric == PoseMetric::Add ? add_error(est, gt, model) : adds_error(est, gt, model, options);
}

BestHypothesis best_hypothesis(const HypothesisSet& hyps, const Pose3& gt, const ObjectModel& model,
                               PoseMetric metric, const MetricOptions& options) {
  BestHypothesis best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t j = 0; j < hyps.size(); ++j) {
    const double e = pose_error(metric, hyps[j], gt, model, options);
    if (e < best.error) {
      best = {j, e};
    }
  }
  return best;
}

double auc(std::span<const double> errors, double threshold) {
  if (errors.empty()) {
    throw InvalidInput("auc needs at least one error sample");
  }
  if (!(threshold > 0.0)) {
    throw InvalidInput("auc threshold must be positive");
  }
  double sum = 0.0;
  for (double e : errors) {
    if (!(e >= 0.0)) {
      throw InvalidInput("auc errors must be nonnegative");
    }
    sum += 1.0 - std::min(e, threshold) / threshold;
  }
  return sum / static_cast<double>(errors.size());
}

}  // namespace mhslam
