#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mhslam/factor_graph.hpp"
#include "mhslam/shape_metrics.hpp"

namespace mhslam {

/// Shape symmetry that makes an object's pose ambiguous. Each kind expands
/// to a finite list of non-identity object-frame rotations.
struct SymmetryDescriptor {
  enum class Kind { None, DiscreteRotations, MirrorPair, AxisContinuous };

  Kind kind = Kind::None;
  /// Rotation axis, or mirror-plane normal for MirrorPair.
  Vector3 axis = Vector3::UnitZ();
  /// Group order for DiscreteRotations; angular sample count for
  /// AxisContinuous.
  int order = 2;

  static SymmetryDescriptor none() { return {}; }
  static SymmetryDescriptor discrete_rotations(const Vector3& axis, int order);
  /// Flip by pi about the plane normal; for a model mirror-symmetric across
  /// two orthogonal planes through the normal this reproduces the model.
  static SymmetryDescriptor mirror_pair(const Vector3& normal);
  /// Continuous symmetry about an axis, discretized into `sample_count`
  /// equally spaced rotations.
  static SymmetryDescriptor axis_continuous(const Vector3& axis, int sample_count);

  /// Throws InvalidInput on a non-unit axis or order < 2.
  void validate() const;

  /// Non-identity group elements, in increasing angle.
  std::vector<Pose3> elements() const;
};

struct SimObject {
  std::uint32_t id = 0;
  Pose3 pose_in_world;
  ObjectModel model;
  SymmetryDescriptor symmetry;
};

struct SimConfig {
  std::uint64_t seed = 1;
  int frame_count = 400;
  /// Frames spent on the inner circle before switching to the outer one.
  int inner_frame_count = 200;
  double inner_radius = 1.5;
  double outer_radius = 2.25;
  /// Largest translation allowed between consecutive camera poses.
  double max_step = 1.0;

  double odometry_sigma_rot = 0.01;
  double odometry_sigma_trans = 0.02;
  double measurement_sigma_rot = 0.05;
  double measurement_sigma_trans = 0.02;

  int hypothesis_count = 5;
  /// Probability that a set contains the (noisy) true pose.
  double p_cov = 0.8;
  /// Per-slot probability of a spurious pose.
  double p_spur = 0.2;

  double visibility_max_range = 3.5;
  double visibility_half_angle = 0.35;

  /// Overrides the default five-object world when set.
  std::optional<std::vector<SimObject>> objects;

  /// Throws InvalidInput when a field is out of range.
  void validate() const;
};

struct SimObservation {
  std::uint32_t landmark_id = 0;
  HypothesisSet hypotheses;
};

struct SimOutput {
  std::vector<SimObject> objects;
  /// Groundtruth camera poses, one per frame.
  std::vector<Pose3> trajectory;
  /// odometry[k] links frame k to frame k + 1.
  std::vector<OdometryFactor> odometry;
  std::vector<std::vector<SimObservation>> observations;
  /// Landmark ids passing the visibility test, per frame.
  std::vector<std::vector<std::uint32_t>> visible;
  Information measurement_information;
};

/**
 * Five objects on a ring of radius 0.9 m around the center of a 1.2 m x
 * 0.8 m cuboid footprint, at bearings 0, 72, 144, 216 and 288 degrees, all
 * on the z = 0 plane:
 *
 *   0 cracker_box     box, no symmetry
 *   1 mug             cylinder with handle, axis-continuous about z (12)
 *   2 tuna_fish_can   cylinder, axis-continuous about z (12)
 *   3 mustard_bottle  asymmetric bottle, no symmetry
 *   4 banana          curved arc, no symmetry
 *
 * A config with `objects` set returns those verbatim.
 */
std::vector<SimObject> generate_world(const SimConfig& config);

/**
 * Camera poses on the inner circle for inner_frame_count frames, then on the
 * outer circle. Frame k on a circle with n frames sits at bearing 2 pi k / n,
 * its optical axis (z) points at the center of the object ring, x is the
 * direction of travel and y is world down. Throws InvalidInput for fewer
 * than two frames or a step longer than max_step.
 */
std::vector<Pose3> generate_trajectory(const SimConfig& config);

/// Measurement noise model: exp(eps) * pose with eps ~ N(0, diag(sigma^2)).
Pose3 perturb(const Pose3& pose, double sigma_rot, double sigma_trans, std::mt19937_64& rng);

std::vector<OdometryFactor> simulate_odometry(const std::vector<Pose3>& groundtruth, const SimConfig& config,
                                              std::mt19937_64& rng);

/**
 * One frontend output for one object. Draw order: coverage flag, a shuffle
 * of the symmetry elements, then per slot the spurious flag and the slot's
 * pose draws, then the final slot shuffle.
 *
 * Slot 0 holds the noisy true pose with probability p_cov. Every other slot
 * is spurious with probability p_spur; otherwise it takes the next symmetry
 * element of the shuffled cycle composed on the right of the true pose (all
 * distinct elements are used before any repeats). Objects without symmetry
 * fill such slots with another noisy copy of the true pose when covered and
 * with spurious poses when not. Spurious poses have a uniform rotation and a
 * translation uniform in the ball of radius 2 x object distance.
 */
HypothesisSet generate_hypotheses(const Pose3& true_relative, std::uint32_t object_id,
                                  const SymmetryDescriptor& symmetry, const SimConfig& config,
                                  std::mt19937_64& rng);

/// Whether an object at `object_in_world` is within range and inside the
/// viewing cone of the camera.
bool is_visible(const Pose3& camera_in_world, const Pose3& object_in_world, const SimConfig& config);

/**
 * Full experiment. RNG draw order: per frame, first the odometry noise of
 * the edge arriving at the frame, then per visible object (by id) its
 * hypothesis set.
 */
SimOutput run_simulation(const SimConfig& config);

/// Landmark id used in dataset files.
constexpr std::uint32_t kLandmarkIdOffset = 100000;

}  // namespace mhslam
