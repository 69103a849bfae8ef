#ifndef TERRAPRINT_POSE_HPP
#define TERRAPRINT_POSE_HPP

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>

// Frame conventions used across the project:
//   world:  x forward along the nominal print direction, z up
//   base:   x forward, y left, z up, origin at chassis center at ground level
//   rpy:    yaw about world z, pitch positive nose-up, roll about body x
namespace terraprint {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

struct Pose {
  Vec3 position{Vec3::Zero()};
  Quat orientation{Quat::Identity()};

  static Pose identity() { return Pose{}; }
};

// 6-DOF perturbation: dp in meters, dr a small-angle rotation vector in radians.
struct DisturbanceVec {
  Vec3 dp{Vec3::Zero()};
  Vec3 dr{Vec3::Zero()};

  static DisturbanceVec zero() { return DisturbanceVec{}; }

  Eigen::Matrix<double, 6, 1> vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << dp, dr;
    return v;
  }
  static DisturbanceVec from_vector(const Eigen::Matrix<double, 6, 1>& v) {
    return DisturbanceVec{v.head<3>(), v.tail<3>()};
  }
  double norm() const { return vector().norm(); }
};

inline DisturbanceVec operator+(const DisturbanceVec& a, const DisturbanceVec& b) {
  return DisturbanceVec{a.dp + b.dp, a.dr + b.dr};
}
inline DisturbanceVec operator-(const DisturbanceVec& a, const DisturbanceVec& b) {
  return DisturbanceVec{a.dp - b.dp, a.dr - b.dr};
}
inline DisturbanceVec operator*(double s, const DisturbanceVec& d) {
  return DisturbanceVec{s * d.dp, s * d.dr};
}

struct RobotState {
  Pose base;                      // chassis frame in world
  double v{0.0};                  // forward speed, m/s
  double omega{0.0};              // yaw rate, rad/s
  Vec3 arm_offset{Vec3::Zero()};  // end-effector offset from the nominal tool point, base frame
  Vec3 arm_vel{Vec3::Zero()};     // base-frame arm velocity, m/s
  double time{0.0};
};

// a then applied after b: world_T_c = a * b.
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

// Rotation vector (angle * axis) of a unit quaternion; inverse of rotation_exp.
Vec3 rotation_log(const Quat& q);
Quat rotation_exp(const Vec3& r);

// Tracking error of `actual` against `target`, both world-frame:
// dp = target.position - actual.position, dr = log(R_target * R_actual^T).
DisturbanceVec pose_error(const Pose& target, const Pose& actual);

// World-frame perturbation: position shifted by d.dp, orientation premultiplied
// by exp(d.dr). Inverse of pose_error in the sense
// pose_error(apply_perturbation(p, d), p) == d.
Pose apply_perturbation(const Pose& p, const DisturbanceVec& d);

// Row-major 4x4 homogeneous transform, the external interchange format.
std::array<double, 16> to_homogeneous(const Pose& p);
Pose from_homogeneous(const std::array<double, 16>& m);

// (roll, pitch, yaw) with pitch positive nose-up; from_rpy is its inverse.
Vec3 to_rpy(const Quat& q);
Quat from_rpy(double roll, double pitch, double yaw);
Quat yaw_rotation(double yaw);

}  // namespace terraprint

#endif
