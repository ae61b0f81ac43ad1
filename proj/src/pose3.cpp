#include "mhslam/pose3.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Geometry>

#include "mhslam/errors.hpp"

namespace mhslam {

namespace {

// Below this rotation angle exp/log and the SO(3) Jacobians switch to
// second-order Taylor expansions.
constexpr double kSmallAngle = 1e-6;

// The SE(3) coupling block divides by up to theta^5; its series is used over
// a wider range so the closed form never loses more than ~1e-6 relative.
constexpr double kSmallAngleCoupling = 1e-2;

}  // namespace

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z) {
  const double n2 = w * w + x * x + y * y + z * z;
  if (!(n2 > 0.0) || !std::isfinite(n2)) {
    throw InvalidInput("quaternion has zero or non-finite norm");
  }
  // Already-unit input is kept bit-for-bit so that normalization is idempotent.
  if (std::abs(n2 - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) {
    const double inv = 1.0 / std::sqrt(n2);
    w *= inv;
    x *= inv;
    y *= inv;
    z *= inv;
  }
  w_ = w;
  x_ = x;
  y_ = y;
  z_ = z;
}

UnitQuaternion UnitQuaternion::conjugate() const { return {Raw{}, w_, -x_, -y_, -z_}; }

UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
  return UnitQuaternion(a.w_ * b.w_ - a.x_ * b.x_ - a.y_ * b.y_ - a.z_ * b.z_,
                        a.w_ * b.x_ + a.x_ * b.w_ + a.y_ * b.z_ - a.z_ * b.y_,
                        a.w_ * b.y_ - a.x_ * b.z_ + a.y_ * b.w_ + a.z_ * b.x_,
                        a.w_ * b.z_ + a.x_ * b.y_ - a.y_ * b.x_ + a.z_ * b.w_);
}

Matrix3 UnitQuaternion::matrix() const {
  const double xx = x_ * x_, yy = y_ * y_, zz = z_ * z_;
  const double xy = x_ * y_, xz = x_ * z_, yz = y_ * z_;
  const double wx = w_ * x_, wy = w_ * y_, wz = w_ * z_;
  Matrix3 r;
  r << 1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy),
      2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx),
      2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy);
  return r;
}

Vector3 UnitQuaternion::rotate(const Vector3& v) const {
  // v + 2 u x (u x v + w v), u = vector part
  const Vector3 u(x_, y_, z_);
  const Vector3 c = u.cross(v) + w_ * v;
  return v + 2.0 * u.cross(c);
}

UnitQuaternion quat_normalize_hemisphere(const UnitQuaternion& q) {
  bool flip = q.w() < 0.0;
  if (q.w() == 0.0) {
    if (q.x() != 0.0) {
      flip = q.x() < 0.0;
    } else if (q.y() != 0.0) {
      flip = q.y() < 0.0;
    } else {
      flip = q.z() < 0.0;
    }
  }
  const double s = flip ? -1.0 : 1.0;
  // "+ 0.0" folds negative zeros so q and -q agree bit-for-bit.
  return UnitQuaternion(s * q.w() + 0.0, s * q.x() + 0.0, s * q.y() + 0.0, s * q.z() + 0.0);
}

Pose3::Pose3(const UnitQuaternion& rotation, const Vector3& translation)
    : rotation_(quat_normalize_hemisphere(rotation)), translation_(translation) {}

Matrix4 Pose3::matrix() const {
  Matrix4 m = Matrix4::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Pose3 compose(const Pose3& a, const Pose3& b) {
  return Pose3(a.rotation() * b.rotation(), a.rotation().rotate(b.translation()) + a.translation());
}

Pose3 inverse(const Pose3& p) {
  const UnitQuaternion inv = p.rotation().conjugate();
  return Pose3(inv, -inv.rotate(p.translation()));
}

Pose3 relative_object_pose(const Pose3& camera_in_world, const Pose3& object_in_world) {
  return compose(inverse(camera_in_world), object_in_world);
}

double rotation_angular_distance(const Pose3& a, const Pose3& b) {
  const UnitQuaternion d = a.rotation().conjugate() * b.rotation();
  return 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
}

double chordal_distance(const Pose3& a, const Pose3& b) {
  const double rot = (a.rotation_matrix() - b.rotation_matrix()).squaredNorm();
  const double trans = (a.translation() - b.translation()).squaredNorm();
  return std::sqrt(rot + trans);
}

namespace so3 {

Matrix3 hat(const Vector3& v) {
  Matrix3 m;
  m << 0.0, -v.z(), v.y(),
      v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

UnitQuaternion exp(const Vector3& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  double real = 0.0;
  double scale = 0.0;
  if (theta < kSmallAngle) {
    real = 1.0 - theta2 / 8.0;
    scale = 0.5 - theta2 / 48.0;
  } else {
    real = std::cos(0.5 * theta);
    scale = std::sin(0.5 * theta) / theta;
  }
  return UnitQuaternion(real, scale * omega.x(), scale * omega.y(), scale * omega.z());
}

Vector3 log(const UnitQuaternion& q_in) {
  const UnitQuaternion q = quat_normalize_hemisphere(q_in);
  const Vector3 v = q.vec();
  const double s = v.norm();
  const double theta = 2.0 * std::atan2(s, q.w());
  if (theta < kSmallAngle) {
    // 2 atan(s / w) / s ~= (2 / w) (1 - s^2 / (3 w^2))
    const double w2 = q.w() * q.w();
    return (2.0 / q.w()) * (1.0 - s * s / (3.0 * w2)) * v;
  }
  return (theta / s) * v;
}

Matrix3 left_jacobian(const Vector3& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Matrix3 w = hat(omega);
  if (theta < kSmallAngle) {
    return Matrix3::Identity() + 0.5 * w + (1.0 / 6.0) * w * w;
  }
  const double a = (1.0 - std::cos(theta)) / theta2;
  const double b = (theta - std::sin(theta)) / (theta2 * theta);
  return Matrix3::Identity() + a * w + b * w * w;
}

Matrix3 left_jacobian_inverse(const Vector3& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Matrix3 w = hat(omega);
  if (theta < kSmallAngle) {
    return Matrix3::Identity() - 0.5 * w + (1.0 / 12.0) * w * w;
  }
  // 1/theta^2 - (1 + cos) / (2 theta sin), written with cot(theta/2) so it
  // stays finite at theta = pi.
  const double half = 0.5 * theta;
  const double c = 1.0 / theta2 - std::cos(half) / (2.0 * theta * std::sin(half));
  return Matrix3::Identity() - 0.5 * w + c * w * w;
}

}  // namespace so3

Pose3 exp(const Twist& xi) {
  const Vector3 omega = xi.head<3>();
  const Vector3 rho = xi.tail<3>();
  return Pose3(so3::exp(omega), so3::left_jacobian(omega) * rho);
}

Twist log(const Pose3& p) {
  const Vector3 omega = so3::log(p.rotation());
  Twist xi;
  xi.head<3>() = omega;
  xi.tail<3>() = so3::left_jacobian_inverse(omega) * p.translation();
  return xi;
}

namespace se3 {

namespace {

// Off-diagonal block of the SE(3) left Jacobian (translation row, rotation
// column).
Matrix3 coupling_block(const Vector3& omega, const Vector3& rho) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Matrix3 w = so3::hat(omega);
  const Matrix3 p = so3::hat(rho);

  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
  if (theta < kSmallAngleCoupling) {
    const double t4 = theta2 * theta2;
    c1 = 1.0 / 6.0 - theta2 / 120.0 + t4 / 5040.0;
    c2 = 1.0 / 24.0 - theta2 / 720.0 + t4 / 40320.0;
    c3 = 1.0 / 120.0 - theta2 / 2520.0 + t4 / 120960.0;
  } else {
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    const double t3 = theta2 * theta;
    c1 = (theta - s) / t3;
    c2 = (theta2 + 2.0 * c - 2.0) / (2.0 * t3 * theta);
    c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t3 * theta2);
  }
  const Matrix3 wp = w * p;
  const Matrix3 pw = p * w;
  const Matrix3 wpw = wp * w;
  const Matrix3 ww = w * w;
  return 0.5 * p + c1 * (wp + pw + wpw) + c2 * (ww * p + pw * w - 3.0 * wpw) +
         c3 * (wpw * w + w * wpw);
}

}  // namespace

Matrix4 hat(const Twist& xi) {
  Matrix4 m = Matrix4::Zero();
  m.topLeftCorner<3, 3>() = so3::hat(xi.head<3>());
  m.topRightCorner<3, 1>() = xi.tail<3>();
  return m;
}

Matrix6 adjoint(const Pose3& p) {
  const Matrix3 r = p.rotation_matrix();
  Matrix6 ad = Matrix6::Zero();
  ad.topLeftCorner<3, 3>() = r;
  ad.bottomRightCorner<3, 3>() = r;
  ad.bottomLeftCorner<3, 3>() = so3::hat(p.translation()) * r;
  return ad;
}

Matrix6 left_jacobian(const Twist& xi) {
  const Matrix3 j = so3::left_jacobian(xi.head<3>());
  Matrix6 out = Matrix6::Zero();
  out.topLeftCorner<3, 3>() = j;
  out.bottomRightCorner<3, 3>() = j;
  out.bottomLeftCorner<3, 3>() = coupling_block(xi.head<3>(), xi.tail<3>());
  return out;
}

Matrix6 left_jacobian_inverse(const Twist& xi) {
  const Matrix3 jinv = so3::left_jacobian_inverse(xi.head<3>());
  Matrix6 out = Matrix6::Zero();
  out.topLeftCorner<3, 3>() = jinv;
  out.bottomRightCorner<3, 3>() = jinv;
  out.bottomLeftCorner<3, 3>() = -jinv * coupling_block(xi.head<3>(), xi.tail<3>()) * jinv;
  return out;
}

Matrix6 right_jacobian_inverse(const Twist& xi) { return left_jacobian_inverse(-xi); }

}  // namespace se3

}  // namespace mhslam
