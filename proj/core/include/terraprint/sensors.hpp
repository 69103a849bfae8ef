#ifndef TERRAPRINT_SENSORS_HPP
#define TERRAPRINT_SENSORS_HPP

#include <string>
#include <vector>

#include "terraprint/plant.hpp"
#include "terraprint/pose.hpp"
#include "terraprint/rng.hpp"
#include "terraprint/terrain.hpp"

namespace terraprint {

struct SensorConfig {
  double imu_rate{100.0};
  double vision_rate{30.0};
  double depth_rate{30.0};
  double encoder_rate{1000.0};
  double sigma_imu_acc{0.02};    // m/s^2
  double sigma_imu_gyro{0.002};  // rad/s
  double sigma_vision_pos{1e-3};
  double sigma_vision_rot{1e-3};
  double sigma_depth{2e-3};
  double sigma_orientation{1e-3};
  double lookahead{0.8};    // patch center distance ahead of the base, m
  double patch_extent{0.3}; // half-width of the 5x5 depth patch, m
};

// Latest value of every channel; between a channel's rate boundaries the last
// emitted value is held (zero-order hold).
struct SensorFrame {
  double t{0.0};
  Vec3 imu_acc{Vec3::Zero()};
  Vec3 imu_gyro{Vec3::Zero()};
  Vec3 base_orientation_est{Vec3::Zero()};  // rpy, rad
  Pose ee_pose_meas;
  double terrain_height_var{0.0};
  Eigen::Vector2d terrain_slope_est{Eigen::Vector2d::Zero()};
  Vec3 joint_pos_meas{Vec3::Zero()};
};

class SensorSuite {
 public:
  SensorSuite(const SensorConfig& cfg, std::uint64_t seed);

  // Call once per plant step; channels refresh only when their rate counter
  // advances, so the returned frame reflects the multi-rate hold behavior.
  const SensorFrame& sample(const GroundTruth& gt, const TerrainField& field,
                            double t);
  const SensorFrame& frame() const { return frame_; }

 private:
  SensorConfig cfg_;
  RngStream rng_;
  SensorFrame frame_;
  long imu_count_{-1}, vision_count_{-1}, depth_count_{-1}, enc_count_{-1};
};

// Fused feature vector of the disturbance predictor. The default 15-entry
// layout is [imu_acc(3), imu_gyro(3), base_rpy(3), height_var(1), slope(2),
// arm_offset(3)]; velocity_terms appends [v, omega, arm_vel(3)] for 20.
struct FeatureLayout {
  bool velocity_terms{false};
  int dim() const { return velocity_terms ? 20 : 15; }
  std::vector<std::string> names() const;
};

Eigen::VectorXd extract_features(const SensorFrame& frame,
                                 const RobotState& state,
                                 const FeatureLayout& layout);

}  // namespace terraprint

#endif
