#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace crustplan {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid transform: x_world = rotation * x_local + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  Pose compose(const Pose& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  Pose inverse() const {
    Mat3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  bool is_orthonormal(double tol = 1e-9) const {
    return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
  }
};

/// Geodesic angle between two rotations, in [0, pi].
inline double rotation_angle(const Mat3& a, const Mat3& b) {
  double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Rotation about a unit axis by angle (Rodrigues).
inline Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

/// Re-orthonormalize a nearly-orthonormal matrix (closest rotation in Frobenius norm).
inline Mat3 project_to_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Mat3 d = Mat3::Identity();
    d(2, 2) = -1;
    r = svd.matrixU() * d * svd.matrixV().transpose();
  }
  return r;
}

/// so(3) log map: rotation vector whose norm is the rotation angle.
inline Vec3 rotation_log(const Mat3& r) {
  Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

/// so(3) exp map.
inline Mat3 rotation_exp(const Vec3& rv) {
  double angle = rv.norm();
  if (angle < 1e-12) return Mat3::Identity();
  return axis_angle(rv / angle, angle);
}

/// Geodesic interpolation between two poses, u in [0, 1].
inline Pose interpolate(const Pose& a, const Pose& b, double u) {
  Vec3 rv = rotation_log(a.rotation.transpose() * b.rotation);
  return {a.rotation * rotation_exp(u * rv),
          (1.0 - u) * a.translation + u * b.translation};
}

}  // namespace crustplan
