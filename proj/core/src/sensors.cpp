#include "terraprint/sensors.hpp"

#include <cmath>

namespace terraprint {

namespace {
long rate_count(double t, double rate) {
  // Small forward bias keeps boundaries that land exactly on a step (e.g.
  // t = 0.1 at 10 Hz) inside that step despite floating-point drift.
  return static_cast<long>(std::floor(t * rate + 1e-9));
}
}  // namespace

SensorSuite::SensorSuite(const SensorConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), rng_(seed) {}

const SensorFrame& SensorSuite::sample(const GroundTruth& gt,
                                       const TerrainField& field, double t) {
  frame_.t = t;

  if (const long c = rate_count(t, cfg_.imu_rate); c != imu_count_) {
    imu_count_ = c;
    for (int i = 0; i < 3; ++i) {
      frame_.imu_acc(i) = gt.body_acc(i) + rng_.normal(cfg_.sigma_imu_acc);
      frame_.imu_gyro(i) = gt.body_gyro(i) + rng_.normal(cfg_.sigma_imu_gyro);
    }
    const Vec3 rpy = to_rpy(gt.state.base.orientation);
    for (int i = 0; i < 3; ++i)
      frame_.base_orientation_est(i) =
          rpy(i) + rng_.normal(cfg_.sigma_orientation);
  }

  if (const long c = rate_count(t, cfg_.vision_rate); c != vision_count_) {
    vision_count_ = c;
    Pose meas = gt.ee_world;
    for (int i = 0; i < 3; ++i)
      meas.position(i) += rng_.normal(cfg_.sigma_vision_pos);
    Vec3 dr;
    for (int i = 0; i < 3; ++i) dr(i) = rng_.normal(cfg_.sigma_vision_rot);
    meas.orientation = (rotation_exp(dr) * meas.orientation).normalized();
    frame_.ee_pose_meas = meas;
  }

  if (const long c = rate_count(t, cfg_.depth_rate); c != depth_count_) {
    depth_count_ = c;
    // 5x5 height patch centered `lookahead` meters ahead of the base, fit a
    // plane, report its gradient (base frame) and the residual spread.
    const Vec3 rpy = to_rpy(gt.state.base.orientation);
    const double yaw = rpy.z();
    const double cx =
        gt.state.base.position.x() + cfg_.lookahead * std::cos(yaw);
    const double cy =
        gt.state.base.position.y() + cfg_.lookahead * std::sin(yaw);
    double h[25];
    double sx = 0, sy = 0, sh = 0, sxx = 0, syy = 0, sxh = 0, syh = 0;
    int k = 0;
    for (int i = -2; i <= 2; ++i) {
      for (int j = -2; j <= 2; ++j, ++k) {
        const double lx = i * cfg_.patch_extent / 2.0;
        const double ly = j * cfg_.patch_extent / 2.0;
        const double wx = cx + lx * std::cos(yaw) - ly * std::sin(yaw);
        const double wy = cy + lx * std::sin(yaw) + ly * std::cos(yaw);
        h[k] = field.height(wx, wy) + rng_.normal(cfg_.sigma_depth);
        sx += lx;
        sy += ly;
        sh += h[k];
        sxx += lx * lx;
        syy += ly * ly;
        sxh += lx * h[k];
        syh += ly * h[k];
      }
    }
    // Centered grid: normal equations are diagonal.
    const double gx = sxh / sxx;
    const double gy = syh / syy;
    const double mean = sh / 25.0;
    double var = 0.0;
    k = 0;
    for (int i = -2; i <= 2; ++i) {
      for (int j = -2; j <= 2; ++j, ++k) {
        const double lx = i * cfg_.patch_extent / 2.0;
        const double ly = j * cfg_.patch_extent / 2.0;
        const double r = h[k] - (mean + gx * lx + gy * ly);
        var += r * r;
      }
    }
    frame_.terrain_slope_est = Eigen::Vector2d(gx, gy);
    frame_.terrain_height_var = std::sqrt(var / 25.0);
  }

  if (const long c = rate_count(t, cfg_.encoder_rate); c != enc_count_) {
    enc_count_ = c;
    frame_.joint_pos_meas = gt.state.arm_offset;  // encoders are noise-free
  }

  return frame_;
}

std::vector<std::string> FeatureLayout::names() const {
  std::vector<std::string> n = {
      "imu_acc_x",  "imu_acc_y",  "imu_acc_z",  "imu_gyro_x", "imu_gyro_y",
      "imu_gyro_z", "base_roll",  "base_pitch", "base_yaw",   "height_var",
      "slope_x",    "slope_y",    "arm_x",      "arm_y",      "arm_z"};
  if (velocity_terms) {
    n.insert(n.end(),
             {"chassis_v", "chassis_omega", "arm_vel_x", "arm_vel_y",
              "arm_vel_z"});
  }
  return n;
}

Eigen::VectorXd extract_features(const SensorFrame& frame,
                                 const RobotState& state,
                                 const FeatureLayout& layout) {
  Eigen::VectorXd z(layout.dim());
  z.segment<3>(0) = frame.imu_acc;
  z.segment<3>(3) = frame.imu_gyro;
  z.segment<3>(6) = frame.base_orientation_est;
  z(9) = frame.terrain_height_var;
  z.segment<2>(10) = frame.terrain_slope_est;
  z.segment<3>(12) = frame.joint_pos_meas;
  if (layout.velocity_terms) {
    z(15) = state.v;
    z(16) = state.omega;
    z.segment<3>(17) = state.arm_vel;
  }
  return z;
}

}  // namespace terraprint
