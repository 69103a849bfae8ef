#ifndef TERRAPRINT_PLANT_HPP
#define TERRAPRINT_PLANT_HPP

#include <cstdint>

#include "terraprint/pose.hpp"
#include "terraprint/rng.hpp"
#include "terraprint/terrain.hpp"

namespace terraprint {

using Vec5 = Eigen::Matrix<double, 5, 1>;  // v, omega, arm velocity xyz

struct PlantConfig {
  double dt{1e-3};
  double wheelbase{1.2};
  double track{0.8};
  double tau_chassis{0.05};  // actuator lag time constants, s
  double tau_arm{0.01};
  double v_bound{1.0};
  double omega_bound{1.0};
  double arm_vel_bound{0.2};
  Vec3 arm_min{-0.3, -0.3, -0.15};
  Vec3 arm_max{0.3, 0.3, 0.15};
  Vec3 tool_nominal{0.6, 0.0, 0.1};  // tool point in the base frame
  double noise_amplitude{0.0};       // wheel-contact perturbation bound, m
  double noise_hold{0.1};            // seconds each wheel draw is held
  double step_offset{0.0};           // one-shot vertical ground offset, m
  double step_time{-1.0};            // offset activates for t >= step_time
};

struct GroundTruth {
  RobotState state;              // realized (noise-included) chassis state
  Pose ee_world;                 // compose(state.base, tool + arm_offset)
  DisturbanceVec injected;       // this step's un-commanded ee motion
  Vec3 body_acc{Vec3::Zero()};   // gravity-compensated body-frame acceleration
  Vec3 body_gyro{Vec3::Zero()};  // body-frame angular rate
  double plane_residual{0.0};    // wheel-contact plane-fit residual, m
};

Pose end_effector_pose(const RobotState& state, const Vec3& tool_nominal);

// Fixed 1 ms kinematic plant. The commanded chassis twist and arm velocity
// pass through first-order actuator lags; x/y/yaw integrate an exact-arc
// unicycle; height, roll, and pitch are slaved to the least-squares plane
// through the four wheel contact heights. Wheel-contact noise perturbs the
// published pose (never the integrated state, so it cannot random-walk); its
// realized effect at the end-effector is reported as `injected`.
class Plant {
 public:
  Plant(const TerrainField* field, const PlantConfig& cfg,
        std::uint64_t noise_seed);

  void init_at(double x, double y, double yaw);
  const GroundTruth& step(const Vec5& command);
  const GroundTruth& truth() const { return truth_; }

  int saturation_count() const { return saturations_; }
  std::uint64_t noise_checksum() const { return noise_hash_; }
  const PlantConfig& config() const { return cfg_; }

 private:
  struct Attitude {
    double z, roll, pitch;
    Quat orientation(double yaw) const;
  };
  Attitude fit_plane(double x, double y, double yaw,
                     const double wheel_dz[4]) const;
  double contact_height(double x, double y) const;
  void refresh_noise();
  void publish();

  const TerrainField* field_;
  PlantConfig cfg_;
  RngStream noise_rng_;

  // Clean integrated state (never sees noise).
  double x_{0.0}, y_{0.0}, yaw_{0.0};
  double v_act_{0.0}, omega_act_{0.0};
  Vec3 arm_offset_{Vec3::Zero()};
  Vec3 arm_vel_act_{Vec3::Zero()};
  double time_{0.0};

  // Held wheel-contact perturbations (FL, FR, RL, RR), refreshed on the
  // noise_hold boundary.
  Pose wheel_noise_[4];
  long noise_epoch_{-1};
  std::uint64_t noise_hash_{1469598103934665603ull};  // FNV-1a basis

  Pose prev_base_;                      // previous published (realized) base
  Vec3 prev_clean_pos_{Vec3::Zero()};   // previous clean chassis position
  Quat prev_clean_q_{Quat::Identity()};
  double prev_yaw_clean_{0.0};
  Vec3 prev_world_vel_{Vec3::Zero()};
  bool has_prev_{false};

  GroundTruth truth_;
  int saturations_{0};
};

struct ExecutorConfig {
  enum class Interp { zoh, linear };
  Interp interp{Interp::zoh};
  double mpc_period{0.1};
  double stale_limit{0.3};   // seconds without a fresh command -> safety stop
  double arm_gain{20.0};     // proportional trim toward the arm target, 1/s
  double arm_vel_bound{0.2};
};

// 100 Hz command executor between the 10 Hz controller and the 1 ms plant:
// interpolates the chassis command, servoes the arm offset toward its target
// with encoder feedback, and stops the chassis when commands go stale.
class Executor {
 public:
  explicit Executor(const ExecutorConfig& cfg) : cfg_(cfg) {}

  void set_command(double t, double v, double omega, const Vec3& arm_target);
  Vec5 tick(double t, const Vec3& joint_pos_meas);

  int watchdog_trips() const { return trips_; }
  bool stale() const { return stale_; }
  const Vec3& arm_target() const { return arm_target_; }

 private:
  ExecutorConfig cfg_;
  double t_cmd_{-1e18};
  double v_{0.0}, omega_{0.0};
  double v_prev_{0.0}, omega_prev_{0.0};
  Vec3 arm_target_{Vec3::Zero()};
  bool stale_{false};
  int trips_{0};
};

}  // namespace terraprint

#endif
