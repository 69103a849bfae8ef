#include "terraprint/plant.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace terraprint {

namespace {
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_mix(std::uint64_t& h, double v) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) {
    h ^= (bits >> (8 * i)) & 0xffu;
    h *= kFnvPrime;
  }
}

double clamp_counted(double v, double lo, double hi, int& count) {
  if (v < lo) {
    ++count;
    return lo;
  }
  if (v > hi) {
    ++count;
    return hi;
  }
  return v;
}
}  // namespace

Pose end_effector_pose(const RobotState& state, const Vec3& tool_nominal) {
  Pose tool;
  tool.position = tool_nominal + state.arm_offset;
  return compose(state.base, tool);
}

Quat Plant::Attitude::orientation(double yaw) const {
  return from_rpy(roll, pitch, yaw);
}

Plant::Plant(const TerrainField* field, const PlantConfig& cfg,
             std::uint64_t noise_seed)
    : field_(field), cfg_(cfg), noise_rng_(noise_seed) {
  init_at(0.0, 0.0, 0.0);
}

double Plant::contact_height(double x, double y) const {
  double h = field_->height(x, y);
  if (cfg_.step_time >= 0.0 && time_ >= cfg_.step_time) h += cfg_.step_offset;
  return h;
}

Plant::Attitude Plant::fit_plane(double x, double y, double yaw,
                                 const double wheel_dz[4]) const {
  // Wheels in body frame: FL, FR, RL, RR.
  const double hx = 0.5 * cfg_.wheelbase, hy = 0.5 * cfg_.track;
  const double ox[4] = {hx, hx, -hx, -hx};
  const double oy[4] = {hy, -hy, hy, -hy};
  const double c = std::cos(yaw), s = std::sin(yaw);
  double h[4];
  for (int i = 0; i < 4; ++i) {
    const double wx = x + c * ox[i] - s * oy[i];
    const double wy = y + s * ox[i] + c * oy[i];
    h[i] = contact_height(wx, wy) + wheel_dz[i];
  }
  // Symmetric layout makes the least-squares plane normal equations diagonal
  // in the body frame.
  double mean = 0.0, sx = 0.0, sy = 0.0;
  for (int i = 0; i < 4; ++i) {
    mean += 0.25 * h[i];
    sx += ox[i] * h[i];
    sy += oy[i] * h[i];
  }
  const double slope_x = sx / (4.0 * hx * hx);
  const double slope_y = sy / (4.0 * hy * hy);
  Attitude att;
  att.z = mean;
  att.pitch = std::atan(slope_x);  // front wheels higher -> nose up
  att.roll = std::atan(slope_y);   // left wheels higher -> positive roll
  return att;
}

void Plant::refresh_noise() {
  const long epoch =
      cfg_.noise_hold > 0.0
          ? static_cast<long>(std::floor(time_ / cfg_.noise_hold + 1e-9))
          : static_cast<long>(time_ / cfg_.dt + 0.5);
  if (epoch == noise_epoch_) return;
  noise_epoch_ = epoch;
  for (auto& w : wheel_noise_) {
    w = wheel_noise(noise_rng_, cfg_.noise_amplitude, cfg_.wheelbase);
    for (int a = 0; a < 3; ++a) fnv_mix(noise_hash_, w.position(a));
    const Vec3 r = rotation_log(w.orientation);
    for (int a = 0; a < 3; ++a) fnv_mix(noise_hash_, r(a));
  }
}

void Plant::init_at(double x, double y, double yaw) {
  x_ = x;
  y_ = y;
  yaw_ = yaw;
  v_act_ = omega_act_ = 0.0;
  arm_offset_.setZero();
  arm_vel_act_.setZero();
  time_ = 0.0;
  noise_epoch_ = -1;
  has_prev_ = false;
  publish();
}

void Plant::publish() {
  refresh_noise();

  const double zero_dz[4] = {0, 0, 0, 0};
  const Attitude clean = fit_plane(x_, y_, yaw_, zero_dz);

  double noisy_dz[4];
  Vec3 mean_dp = Vec3::Zero();
  double mean_dyaw = 0.0;
  for (int i = 0; i < 4; ++i) {
    noisy_dz[i] = wheel_noise_[i].position.z();
    mean_dp += 0.25 * wheel_noise_[i].position;
    mean_dyaw += 0.25 * rotation_log(wheel_noise_[i].orientation).z();
  }
  const double yaw_r = yaw_ + mean_dyaw;
  const Attitude realized = fit_plane(x_, y_, yaw_, noisy_dz);

  // Wheel-level x/y perturbations are expressed in the body frame; rotate the
  // averaged shift into the world.
  const double c = std::cos(yaw_), s = std::sin(yaw_);
  const Vec3 dp_world(c * mean_dp.x() - s * mean_dp.y(),
                      s * mean_dp.x() + c * mean_dp.y(), 0.0);

  RobotState st;
  st.base.position = Vec3(x_ + dp_world.x(), y_ + dp_world.y(), realized.z);
  st.base.orientation = realized.orientation(yaw_r);
  st.v = v_act_;
  st.omega = omega_act_;
  st.arm_offset = arm_offset_;
  st.arm_vel = arm_vel_act_;
  st.time = time_;

  const Pose ee = end_effector_pose(st, cfg_.tool_nominal);

  const Vec3 clean_pos(x_, y_, clean.z);
  const Quat clean_q = clean.orientation(yaw_);

  GroundTruth gt;
  gt.state = st;
  gt.ee_world = ee;

  if (has_prev_) {
    // Model-advance the previous published base by this step's commanded
    // (clean) increments, riding the previously published attitude's surface
    // tangent (height climbs with the body-x rise over run, tilt frozen) —
    // the same motion model the controller predicts with. The gap between
    // that and the realized pose is the motion the controller could not have
    // predicted.
    const double dyaw = yaw_ - prev_yaw_clean_;
    const Vec3 dxy(x_ - prev_clean_pos_.x(), y_ - prev_clean_pos_.y(), 0.0);
    const Vec3 prev_bx =
        prev_base_.orientation.toRotationMatrix().col(0);
    const double prev_run = std::hypot(prev_bx.x(), prev_bx.y());
    const double prev_climb = prev_run > 0.1 ? prev_bx.z() / prev_run : 0.0;
    const Vec3 prev_rpy = to_rpy(prev_base_.orientation);
    const double dz = prev_climb * (dxy.x() * std::cos(prev_rpy.z()) +
                                    dxy.y() * std::sin(prev_rpy.z()));
    RobotState model = st;
    model.base.position = prev_base_.position + dxy + Vec3(0.0, 0.0, dz);
    model.base.orientation =
        from_rpy(prev_rpy.x(), prev_rpy.y(), prev_rpy.z() + dyaw);
    const Pose ee_model = end_effector_pose(model, cfg_.tool_nominal);
    gt.injected = pose_error(ee, ee_model);

    const Vec3 world_vel = (clean_pos - prev_clean_pos_) / cfg_.dt;
    const Eigen::Matrix3d R = clean_q.toRotationMatrix();
    gt.body_acc = R.transpose() * (world_vel - prev_world_vel_) / cfg_.dt;
    gt.body_gyro =
        rotation_log(Quat(prev_clean_q_.conjugate() * clean_q)) / cfg_.dt;
    prev_world_vel_ = world_vel;
  } else {
    gt.injected = DisturbanceVec::zero();
    prev_world_vel_.setZero();
  }

  double res = 0.0;
  {
    const double hx = 0.5 * cfg_.wheelbase, hy = 0.5 * cfg_.track;
    const double ox[4] = {hx, hx, -hx, -hx};
    const double oy[4] = {hy, -hy, hy, -hy};
    const double tx = std::tan(realized.pitch), ty = std::tan(realized.roll);
    for (int i = 0; i < 4; ++i) {
      const double wx = x_ + c * ox[i] - s * oy[i];
      const double wy = y_ + s * ox[i] + c * oy[i];
      const double h = contact_height(wx, wy) + noisy_dz[i];
      const double fit = realized.z + tx * ox[i] + ty * oy[i];
      res += (h - fit) * (h - fit);
    }
    gt.plane_residual = std::sqrt(res / 4.0);
  }

  prev_base_ = st.base;
  prev_clean_pos_ = clean_pos;
  prev_clean_q_ = clean_q;
  prev_yaw_clean_ = yaw_;
  has_prev_ = true;
  truth_ = gt;
}

const GroundTruth& Plant::step(const Vec5& command) {
  Vec5 cmd;
  cmd(0) = clamp_counted(command(0), -cfg_.v_bound, cfg_.v_bound, saturations_);
  cmd(1) = clamp_counted(command(1), -cfg_.omega_bound, cfg_.omega_bound,
                         saturations_);
  for (int i = 0; i < 3; ++i)
    cmd(2 + i) = clamp_counted(command(2 + i), -cfg_.arm_vel_bound,
                               cfg_.arm_vel_bound, saturations_);

  const double kc =
      cfg_.tau_chassis > 0.0 ? 1.0 - std::exp(-cfg_.dt / cfg_.tau_chassis) : 1.0;
  const double ka =
      cfg_.tau_arm > 0.0 ? 1.0 - std::exp(-cfg_.dt / cfg_.tau_arm) : 1.0;
  v_act_ += kc * (cmd(0) - v_act_);
  omega_act_ += kc * (cmd(1) - omega_act_);
  arm_vel_act_ += ka * (cmd.tail<3>() - arm_vel_act_);

  // Exact-arc unicycle increment.
  const double yaw_new = yaw_ + omega_act_ * cfg_.dt;
  if (std::abs(omega_act_) > 1e-9) {
    x_ += v_act_ / omega_act_ * (std::sin(yaw_new) - std::sin(yaw_));
    y_ -= v_act_ / omega_act_ * (std::cos(yaw_new) - std::cos(yaw_));
  } else {
    x_ += v_act_ * std::cos(yaw_) * cfg_.dt;
    y_ += v_act_ * std::sin(yaw_) * cfg_.dt;
  }
  yaw_ = yaw_new;

  for (int i = 0; i < 3; ++i) {
    arm_offset_(i) = clamp_counted(arm_offset_(i) + arm_vel_act_(i) * cfg_.dt,
                                   cfg_.arm_min(i), cfg_.arm_max(i),
                                   saturations_);
  }
  time_ += cfg_.dt;

  publish();
  return truth_;
}

void Executor::set_command(double t, double v, double omega,
                           const Vec3& arm_target) {
  v_prev_ = v_;
  omega_prev_ = omega_;
  v_ = v;
  omega_ = omega;
  arm_target_ = arm_target;
  t_cmd_ = t;
}

Vec5 Executor::tick(double t, const Vec3& joint_pos_meas) {
  Vec5 out = Vec5::Zero();
  stale_ = (t - t_cmd_) > cfg_.stale_limit;
  if (stale_) {
    ++trips_;
    // Chassis safety stop; the arm keeps holding its last target.
  } else if (cfg_.interp == ExecutorConfig::Interp::linear) {
    const double f =
        std::clamp((t - t_cmd_) / cfg_.mpc_period, 0.0, 1.0);
    out(0) = v_prev_ + f * (v_ - v_prev_);
    out(1) = omega_prev_ + f * (omega_ - omega_prev_);
  } else {
    out(0) = v_;
    out(1) = omega_;
  }
  const Vec3 trim = cfg_.arm_gain * (arm_target_ - joint_pos_meas);
  for (int i = 0; i < 3; ++i)
    out(2 + i) = std::clamp(trim(i), -cfg_.arm_vel_bound, cfg_.arm_vel_bound);
  return out;
}

}  // namespace terraprint
