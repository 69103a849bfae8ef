#include "terraprint/pose.hpp"

#include <cmath>
#include <stdexcept>

namespace terraprint {

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.position = a.position + a.orientation * b.position;
  out.orientation = (a.orientation * b.orientation).normalized();
  return out;
}

Pose inverse(const Pose& p) {
  Pose out;
  out.orientation = p.orientation.conjugate();
  out.position = -(out.orientation * p.position);
  return out;
}

Vec3 rotation_log(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v(q.x(), q.y(), q.z());
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v;
  const double angle = 2.0 * std::atan2(s, q.w());
  return (angle / s) * v;
}

Quat rotation_exp(const Vec3& r) {
  const double angle = r.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * r.x(), 0.5 * r.y(), 0.5 * r.z());
    return q.normalized();
  }
  return Quat(Eigen::AngleAxisd(angle, r / angle));
}

DisturbanceVec pose_error(const Pose& target, const Pose& actual) {
  DisturbanceVec e;
  e.dp = target.position - actual.position;
  e.dr = rotation_log(target.orientation * actual.orientation.conjugate());
  return e;
}

Pose apply_perturbation(const Pose& p, const DisturbanceVec& d) {
  Pose out;
  out.position = p.position + d.dp;
  out.orientation = (rotation_exp(d.dr) * p.orientation).normalized();
  return out;
}

std::array<double, 16> to_homogeneous(const Pose& p) {
  const Eigen::Matrix3d r = p.orientation.toRotationMatrix();
  std::array<double, 16> m{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m[static_cast<size_t>(4 * i + j)] = r(i, j);
    m[static_cast<size_t>(4 * i + 3)] = p.position(i);
  }
  m[12] = m[13] = m[14] = 0.0;
  m[15] = 1.0;
  return m;
}

Pose from_homogeneous(const std::array<double, 16>& m) {
  Eigen::Matrix3d r;
  Vec3 t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = m[static_cast<size_t>(4 * i + j)];
    t(i) = m[static_cast<size_t>(4 * i + 3)];
  }
  if ((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() > 1e-6)
    throw std::invalid_argument("from_homogeneous: rotation block is not orthonormal");
  Pose p;
  p.position = t;
  p.orientation = Quat(r).normalized();
  return p;
}

Vec3 to_rpy(const Quat& q) {
  const Eigen::Matrix3d r = q.toRotationMatrix();
  const Vec3 fwd = r.col(0);
  const double yaw = std::atan2(fwd.y(), fwd.x());
  const double pitch = std::atan2(fwd.z(), std::hypot(fwd.x(), fwd.y()));
  const Eigen::Matrix3d rzp =
      (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(-pitch, Vec3::UnitY()))
          .toRotationMatrix();
  const Eigen::Matrix3d res = rzp.transpose() * r;
  const double roll = std::atan2(res(2, 1), res(1, 1));
  return Vec3(roll, pitch, yaw);
}

Quat from_rpy(double roll, double pitch, double yaw) {
  return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
              Eigen::AngleAxisd(-pitch, Vec3::UnitY()) *
              Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .normalized();
}

Quat yaw_rotation(double yaw) {
  return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
}

}  // namespace terraprint
