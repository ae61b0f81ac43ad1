#include "mhslam/ambiguity_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "mhslam/errors.hpp"

namespace mhslam {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kObjectRingRadius = 0.9;

Pose3 rotation_about(const Vector3& axis, double angle) {
  Twist xi = Twist::Zero();
  xi.head<3>() = axis * angle;
  return exp(xi);
}

bool unit_norm(const Vector3& v) { return std::abs(v.norm() - 1.0) < 1e-9; }

// 26 points: corners, edge midpoints and face centers of a box centered on
// the origin.
std::vector<Vector3> box_points(double dx, double dy, double dz) {
  std::vector<Vector3> pts;
  for (int i = -1; i <= 1; ++i) {
    for (int j = -1; j <= 1; ++j) {
      for (int k = -1; k <= 1; ++k) {
        if (i != 0 || j != 0 || k != 0) {
          pts.emplace_back(0.5 * dx * i, 0.5 * dy * j, 0.5 * dz * k);
        }
      }
    }
  }
  return pts;
}

// Rings of `samples` points at `rings` heights plus both cap centers; closed
// under rotations by 2 pi / samples about z.
std::vector<Vector3> cylinder_points(double radius, double height, int samples, int rings) {
  std::vector<Vector3> pts;
  for (int r = 0; r < rings; ++r) {
    const double z = -0.5 * height + height * r / (rings - 1);
    for (int s = 0; s < samples; ++s) {
      const double a = 2.0 * kPi * s / samples;
      pts.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
    }
  }
  pts.emplace_back(0.0, 0.0, -0.5 * height);
  pts.emplace_back(0.0, 0.0, 0.5 * height);
  return pts;
}

ObjectModel make_model(int id, std::string name, std::vector<Vector3> points) {
  return ObjectModel{id, std::move(name), std::move(points)};
}

std::vector<ObjectModel> default_models() {
  std::vector<ObjectModel> models;
  models.push_back(make_model(0, "cracker_box", box_points(0.16, 0.06, 0.21)));

  auto mug = cylinder_points(0.04, 0.09, 24, 3);
  for (int s = 0; s <= 6; ++s) {
    const double a = kPi * s / 6.0 - 0.5 * kPi;
    mug.emplace_back(0.04 + 0.025 + 0.025 * std::cos(a), 0.0, 0.03 * std::sin(a));
  }
  models.push_back(make_model(1, "mug", std::move(mug)));

  models.push_back(make_model(2, "tuna_fish_can", cylinder_points(0.043, 0.033, 24, 2)));

  auto mustard = box_points(0.095, 0.06, 0.15);
  for (int s = 0; s < 4; ++s) {
    mustard.emplace_back(0.02, 0.0, 0.075 + 0.01 * s);
  }
  mustard.emplace_back(0.02, 0.01, 0.115);
  models.push_back(make_model(3, "mustard_bottle", std::move(mustard)));

  std::vector<Vector3> banana;
  for (int s = 0; s <= 10; ++s) {
    const double a = 0.25 * kPi + 0.5 * kPi * s / 10.0;
    const double thickness = 0.015 * std::sin(kPi * s / 10.0) + 0.005;
    banana.emplace_back(0.1 * std::cos(a), 0.1 * std::sin(a) - 0.07, thickness);
    banana.emplace_back(0.1 * std::cos(a), 0.1 * std::sin(a) - 0.07, -thickness);
  }
  banana.emplace_back(0.075, 0.0, 0.0);
  models.push_back(make_model(4, "banana", std::move(banana)));
  return models;
}

Pose3 uniform_rotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double u1 = uni(rng);
  const double u2 = uni(rng);
  const double u3 = uni(rng);
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  return Pose3(UnitQuaternion(b * std::cos(2.0 * kPi * u3), a * std::sin(2.0 * kPi * u2),
                              a * std::cos(2.0 * kPi * u2), b * std::sin(2.0 * kPi * u3)),
               Vector3::Zero());
}

Pose3 spurious_pose(const Pose3& true_relative, std::mt19937_64& rng) {
  const Pose3 rot = uniform_rotation(rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Vector3 dir(normal(rng), normal(rng), normal(rng));
  const double n = dir.norm();
  dir = n > 0.0 ? Vector3(dir / n) : Vector3::UnitZ();
  const double radius = 2.0 * true_relative.translation().norm() * std::cbrt(uni(rng));
  return Pose3(rot.rotation(), radius * dir);
}

OdometryFactor noisy_odometry(const std::vector<Pose3>& gt, std::size_t k, const SimConfig& config,
                              const Information& information, std::mt19937_64& rng) {
  const Pose3 relative = compose(inverse(gt[k]), gt[k + 1]);
  return OdometryFactor{VariableKey::robot(static_cast<std::uint32_t>(k)),
                        VariableKey::robot(static_cast<std::uint32_t>(k + 1)),
                        perturb(relative, config.odometry_sigma_rot, config.odometry_sigma_trans, rng),
                        information};
}

Information odometry_information(const SimConfig& config) {
  // Zero sigmas give exact measurements; the solver still needs a finite
  // weight, so fall back to a tight one.
  const double rot = config.odometry_sigma_rot > 0.0 ? config.odometry_sigma_rot : 1e-3;
  const double trans = config.odometry_sigma_trans > 0.0 ? config.odometry_sigma_trans : 1e-3;
  return Information::from_sigmas(rot, trans);
}

Information measurement_information(const SimConfig& config) {
  const double rot = config.measurement_sigma_rot > 0.0 ? config.measurement_sigma_rot : 1e-3;
  const double trans = config.measurement_sigma_trans > 0.0 ? config.measurement_sigma_trans : 1e-3;
  return Information::from_sigmas(rot, trans);
}

}  // namespace

SymmetryDescriptor SymmetryDescriptor::discrete_rotations(const Vector3& axis, int order) {
  SymmetryDescriptor s{Kind::DiscreteRotations, axis, order};
  s.validate();
  return s;
}

SymmetryDescriptor SymmetryDescriptor::mirror_pair(const Vector3& normal) {
  SymmetryDescriptor s{Kind::MirrorPair, normal, 2};
  s.validate();
  return s;
}

SymmetryDescriptor SymmetryDescriptor::axis_continuous(const Vector3& axis, int sample_count) {
  SymmetryDescriptor s{Kind::AxisContinuous, axis, sample_count};
  s.validate();
  return s;
}

void SymmetryDescriptor::validate() const {
  if (kind == Kind::None) {
    return;
  }
  if (!unit_norm(axis)) {
    throw InvalidInput("symmetry axis must be unit-norm");
  }
  if (order < 2) {
    throw InvalidInput("symmetry order must be at least 2");
  }
}

std::vector<Pose3> SymmetryDescriptor::elements() const {
  validate();
  std::vector<Pose3> out;
  switch (kind) {
    case Kind::None:
      break;
    case Kind::MirrorPair:
      out.push_back(rotation_about(axis, kPi));
      break;
    case Kind::DiscreteRotations:
    case Kind::AxisContinuous:
      for (int m = 1; m < order; ++m) {
        out.push_back(rotation_about(axis, 2.0 * kPi * m / order));
      }
      break;
  }
  return out;
}

void SimConfig::validate() const {
  const auto probability = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (frame_count < 2) {
    throw InvalidInput("frame_count must be at least 2");
  }
  if (inner_frame_count < 1 || inner_frame_count > frame_count) {
    throw InvalidInput("inner_frame_count must be in [1, frame_count]");
  }
  if (!(inner_radius > 0.0) || !(outer_radius > 0.0) || !(max_step > 0.0)) {
    throw InvalidInput("radii and step cap must be positive");
  }
  if (odometry_sigma_rot < 0.0 || odometry_sigma_trans < 0.0 || measurement_sigma_rot < 0.0 ||
      measurement_sigma_trans < 0.0) {
    throw InvalidInput("noise sigmas must be nonnegative");
  }
  if (hypothesis_count < 1) {
    throw InvalidInput("hypothesis_count must be at least 1");
  }
  if (!probability(p_cov) || !probability(p_spur)) {
    throw InvalidInput("probabilities must lie in [0, 1]");
  }
  if (visibility_max_range < 0.0 || visibility_half_angle < 0.0) {
    throw InvalidInput("visibility limits must be nonnegative");
  }
  if (objects) {
    for (std::size_t i = 0; i < objects->size(); ++i) {
      (*objects)[i].symmetry.validate();
      for (std::size_t j = 0; j < i; ++j) {
        if ((*objects)[i].id == (*objects)[j].id) {
          throw InvalidInput("duplicate object id " + std::to_string((*objects)[i].id));
        }
      }
    }
  }
}

std::vector<SimObject> generate_world(const SimConfig& config) {
  if (config.objects) {
    return *config.objects;
  }
  auto models = default_models();
  const std::array<SymmetryDescriptor, 5> symmetries{
      SymmetryDescriptor::none(),
      SymmetryDescriptor::axis_continuous(Vector3::UnitZ(), 12),
      SymmetryDescriptor::axis_continuous(Vector3::UnitZ(), 12),
      SymmetryDescriptor::none(),
      SymmetryDescriptor::none(),
  };
  std::vector<SimObject> objects;
  for (std::uint32_t j = 0; j < 5; ++j) {
    const double bearing = 2.0 * kPi * j / 5.0;
    const Pose3 yaw = rotation_about(Vector3::UnitZ(), bearing + 0.7 * j + 0.3);
    const Pose3 pose(yaw.rotation(),
                     Vector3(kObjectRingRadius * std::cos(bearing), kObjectRingRadius * std::sin(bearing), 0.0));
    objects.push_back(SimObject{j, pose, std::move(models[j]), symmetries[j]});
  }
  return objects;
}

std::vector<Pose3> generate_trajectory(const SimConfig& config) {
  if (config.frame_count < 2) {
    throw InvalidInput("trajectory needs at least two frames");
  }
  config.validate();
  const int inner = config.inner_frame_count;
  const int outer = config.frame_count - inner;
  std::vector<Pose3> poses;
  poses.reserve(config.frame_count);
  const auto on_circle = [](double radius, double bearing) {
    const double c = std::cos(bearing);
    const double s = std::sin(bearing);
    Matrix3 r;
    // columns: x = travel direction, y = world down, z = toward the center
    r << -s, 0.0, -c,
        c, 0.0, -s,
        0.0, -1.0, 0.0;
    const Eigen::Quaterniond q(r);
    return Pose3(UnitQuaternion(q.w(), q.x(), q.y(), q.z()), Vector3(radius * c, radius * s, 0.0));
  };
  for (int k = 0; k < inner; ++k) {
    poses.push_back(on_circle(config.inner_radius, 2.0 * kPi * k / inner));
  }
  for (int k = 0; k < outer; ++k) {
    poses.push_back(on_circle(config.outer_radius, 2.0 * kPi * k / outer));
  }
  for (std::size_t k = 1; k < poses.size(); ++k) {
    if ((poses[k].translation() - poses[k - 1].translation()).norm() > config.max_step) {
      throw InvalidInput("trajectory step " + std::to_string(k) + " exceeds max_step");
    }
  }
  return poses;
}

Pose3 perturb(const Pose3& pose, double sigma_rot, double sigma_trans, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Twist eps;
  for (int i = 0; i < 6; ++i) {
    eps(i) = normal(rng) * (i < 3 ? sigma_rot : sigma_trans);
  }
  return compose(exp(eps), pose);
}

std::vector<OdometryFactor> simulate_odometry(const std::vector<Pose3>& groundtruth, const SimConfig& config,
                                              std::mt19937_64& rng) {
  if (groundtruth.size() < 2) {
    throw InvalidInput("odometry needs at least two poses");
  }
  const Information information = odometry_information(config);
  std::vector<OdometryFactor> out;
  out.reserve(groundtruth.size() - 1);
  for (std::size_t k = 0; k + 1 < groundtruth.size(); ++k) {
    out.push_back(noisy_odometry(groundtruth, k, config, information, rng));
  }
  return out;
}

HypothesisSet generate_hypotheses(const Pose3& true_relative, std::uint32_t object_id,
                                  const SymmetryDescriptor& symmetry, const SimConfig& config,
                                  std::mt19937_64& rng) {
  if (config.hypothesis_count < 1) {
    throw InvalidInput("hypothesis_count must be at least 1");
  }
  std::bernoulli_distribution covered_draw(config.p_cov);
  std::bernoulli_distribution spurious_draw(config.p_spur);
  const auto noisy = [&](const Pose3& p) {
    return perturb(p, config.measurement_sigma_rot, config.measurement_sigma_trans, rng);
  };

  const bool covered = covered_draw(rng);
  std::vector<Pose3> cycle = symmetry.elements();
  std::shuffle(cycle.begin(), cycle.end(), rng);

  std::vector<Pose3> slots;
  slots.reserve(config.hypothesis_count);
  if (covered) {
    slots.push_back(noisy(true_relative));
  }
  std::size_t next = 0;
  while (static_cast<int>(slots.size()) < config.hypothesis_count) {
    if (spurious_draw(rng)) {
      slots.push_back(spurious_pose(true_relative, rng));
    } else if (!cycle.empty()) {
      slots.push_back(noisy(compose(true_relative, cycle[next % cycle.size()])));
      ++next;
    } else if (covered) {
      slots.push_back(noisy(true_relative));
    } else {
      slots.push_back(spurious_pose(true_relative, rng));
    }
  }
  std::shuffle(slots.begin(), slots.end(), rng);
  return HypothesisSet(static_cast<int>(object_id), std::move(slots));
}

bool is_visible(const Pose3& camera_in_world, const Pose3& object_in_world, const SimConfig& config) {
  const Vector3 in_camera = relative_object_pose(camera_in_world, object_in_world).translation();
  const double range = in_camera.norm();
  if (range > config.visibility_max_range || !(in_camera.z() > 0.0)) {
    return false;
  }
  const double off_axis = std::atan2(in_camera.head<2>().norm(), in_camera.z());
  return off_axis <= config.visibility_half_angle;
}

SimOutput run_simulation(const SimConfig& config) {
  config.validate();
  SimOutput out;
  out.objects = generate_world(config);
  out.trajectory = generate_trajectory(config);
  out.measurement_information = measurement_information(config);
  const Information odo_info = odometry_information(config);

  std::mt19937_64 rng(config.seed);
  const std::size_t frames = out.trajectory.size();
  out.observations.resize(frames);
  out.visible.resize(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    if (k > 0) {
      out.odometry.push_back(noisy_odometry(out.trajectory, k - 1, config, odo_info, rng));
    }
    for (const SimObject& object : out.objects) {
      if (!is_visible(out.trajectory[k], object.pose_in_world, config)) {
        continue;
      }
      out.visible[k].push_back(object.id);
      const Pose3 relative = relative_object_pose(out.trajectory[k], object.pose_in_world);
      out.observations[k].push_back(
          SimObservation{object.id, generate_hypotheses(relative, object.id, object.symmetry, config, rng)});
    }
  }
  return out;
}

}  // namespace mhslam
