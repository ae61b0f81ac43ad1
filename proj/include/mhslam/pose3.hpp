#pragma once

#include <Eigen/Core>

namespace mhslam {

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Matrix4 = Eigen::Matrix4d;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Tangent element of SE(3), ordered [rotation (rad) | translation (m)].
using Twist = Eigen::Matrix<double, 6, 1>;

/**
 * Unit quaternion stored as (w, x, y, z).
 *
 * The constructor normalizes its input; it does not pick a hemisphere. Use
 * quat_normalize_hemisphere() for the canonical form (w >= 0, and at w == 0
 * the first nonzero of x, y, z positive).
 */
class UnitQuaternion {
 public:
  UnitQuaternion() = default;

  /// Throws InvalidInput on a zero-norm or non-finite input.
  UnitQuaternion(double w, double x, double y, double z);

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }

  Eigen::Vector4d coeffs_wxyz() const { return {w_, x_, y_, z_}; }
  Vector3 vec() const { return {x_, y_, z_}; }

  UnitQuaternion conjugate() const;
  Matrix3 matrix() const;
  Vector3 rotate(const Vector3& v) const;

  friend UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b);
  friend bool operator==(const UnitQuaternion&, const UnitQuaternion&) = default;

 private:
  struct Raw {};
  UnitQuaternion(Raw, double w, double x, double y, double z) : w_(w), x_(x), y_(y), z_(z) {}

  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

/// Canonical representative of the rotation: unit norm, w >= 0, ties at
/// w == 0 resolved by making the first nonzero of (x, y, z) positive.
/// q and -q map to bit-identical results.
UnitQuaternion quat_normalize_hemisphere(const UnitQuaternion& q);

/// Rigid transform x -> R x + t. The rotation is always held in canonical
/// hemisphere form.
class Pose3 {
 public:
  Pose3() = default;
  Pose3(const UnitQuaternion& rotation, const Vector3& translation);
  explicit Pose3(const Vector3& translation) : translation_(translation) {}

  static Pose3 identity() { return {}; }

  const UnitQuaternion& rotation() const { return rotation_; }
  const Vector3& translation() const { return translation_; }

  Matrix3 rotation_matrix() const { return rotation_.matrix(); }
  Matrix4 matrix() const;

  /// Applies the transform to a point.
  Vector3 act(const Vector3& p) const { return rotation_.rotate(p) + translation_; }

  friend bool operator==(const Pose3&, const Pose3&) = default;

 private:
  UnitQuaternion rotation_;
  Vector3 translation_ = Vector3::Zero();
};

Pose3 compose(const Pose3& a, const Pose3& b);
Pose3 inverse(const Pose3& p);

/// Closed-form exponential: Rodrigues on the rotational part, left Jacobian
/// applied to the translational part.
Pose3 exp(const Twist& xi);

/// Inverse of exp(). The rotational part has norm in [0, pi]; at exactly pi
/// the axis follows the hemisphere tie rule.
Twist log(const Pose3& p);

/// h(X) = inverse(camera) * object: the object pose seen from the camera.
Pose3 relative_object_pose(const Pose3& camera_in_world, const Pose3& object_in_world);

/// Geodesic angle between the two rotations, in [0, pi].
double rotation_angular_distance(const Pose3& a, const Pose3& b);

/// sqrt(||R_a - R_b||_F^2 + ||t_a - t_b||^2).
double chordal_distance(const Pose3& a, const Pose3& b);

namespace so3 {

Matrix3 hat(const Vector3& v);
UnitQuaternion exp(const Vector3& omega);
/// Rotation vector of a quaternion; norm in [0, pi].
Vector3 log(const UnitQuaternion& q);
Matrix3 left_jacobian(const Vector3& omega);
Matrix3 left_jacobian_inverse(const Vector3& omega);

}  // namespace so3

namespace se3 {

/// Twist as a 4x4 matrix [hat(rot) trans; 0 0].
Matrix4 hat(const Twist& xi);

/// Adjoint in [rot | trans] ordering: exp(Ad(T) xi) = T exp(xi) T^-1.
Matrix6 adjoint(const Pose3& p);

/// exp(xi + d) ~= exp(J_l(xi) d) exp(xi).
Matrix6 left_jacobian(const Twist& xi);
Matrix6 left_jacobian_inverse(const Twist& xi);

/// log(exp(xi) exp(d)) ~= xi + J_r^-1(xi) d, with J_r(xi) = J_l(-xi).
Matrix6 right_jacobian_inverse(const Twist& xi);

}  // namespace se3

}  // namespace mhslam
