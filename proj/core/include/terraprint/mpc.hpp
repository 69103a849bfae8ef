#ifndef TERRAPRINT_MPC_HPP
#define TERRAPRINT_MPC_HPP

#include <cmath>
#include <deque>
#include <vector>

#include "terraprint/planner.hpp"
#include "terraprint/plant.hpp"
#include "terraprint/pose.hpp"
#include "terraprint/predictor.hpp"

namespace terraprint {

struct MpcParams {
  int horizon{10};          // prediction steps
  int control_horizon{5};   // decision steps; input held constant afterwards
  double dt{0.1};
  Eigen::Matrix<double, 6, 1> q_diag{
      (Eigen::Matrix<double, 6, 1>() << 1.0, 1.0, 1.0, 0.1, 0.1, 0.1).finished() *
      1e6};                                              // pose error weight
  Vec5 r_diag{(Vec5() << 1.0, 1.0, 10.0, 10.0, 10.0).finished()};  // input-rate weight
  // Absolute input magnitude weight. Nonzero on the arm axes so sustained
  // (DC) corrections migrate to the chassis: with a pure rate penalty every
  // speed change leaves a permanent arm-velocity remainder that walks the arm
  // into its workspace wall.
  Vec5 r_abs_diag{(Vec5() << 0.0, 0.0, 1.0, 1.0, 1.0).finished()};
  double v_bound{1.0};        // |v| m/s
  double omega_bound{1.0};    // |omega| rad/s
  double arm_vel_bound{0.2};  // per-axis arm velocity, m/s
  double preview_valid{0.5};   // each disturbance estimate's lead, s
  double preview_clamp{0.02};  // per-component preview ceiling, m / rad

  // Actuation model: the chassis realizes commanded speeds through known
  // first-order lags, and the arm realizes this fraction of a commanded
  // velocity step within one period (its servo re-targets every period).
  // Modeling these keeps speed ramps from ringing the loop; zero taus fall
  // back to instant actuation.
  double tau_v{0.05};
  double tau_omega{0.05};
  double arm_response{0.9};

  double beta_v() const { return tau_v > 0.0 ? std::exp(-dt / tau_v) : 0.0; }
  double beta_omega() const {
    return tau_omega > 0.0 ? std::exp(-dt / tau_omega) : 0.0;
  }
  double gamma_v() const { return tau_v * (1.0 - beta_v()); }
  double gamma_omega() const { return tau_omega * (1.0 - beta_omega()); }

  void validate() const;  // throws on inconsistent settings
};

// One 10 Hz control problem. previews[k] is the per-step pose disturbance
// expected during step k, expressed in the chassis yaw frame; entries past the
// prediction validity window are already decayed toward zero. x0.v and
// x0.omega carry the current *actual* chassis rates (lag-filtered estimates),
// the initial conditions of the actuation model.
struct MpcProblem {
  RobotState x0;
  Pose ee0;       // measured end-effector pose (vision), world frame
  Pose ref_now;   // reference at the current instant
  Vec5 u_prev{Vec5::Zero()};
  std::vector<Pose> reference;           // horizon poses at t + (k+1) dt
  std::vector<DisturbanceVec> previews;  // one per horizon step
  MpcParams params;
};

struct MpcSolution {
  std::vector<Vec5> u_seq;                      // control_horizon inputs
  std::vector<DisturbanceVec> predicted_errors; // per horizon step
  double cost{0.0};
  double solve_time{0.0};  // wall seconds
  int active_constraints{0};
  int iterations{0};
  bool fallback{false};  // active-set cap hit; command is a clamped optimum
};

// Schedules learned disturbance estimates onto the horizon steps they were
// made for. The predictor emits, once per control period, the disturbance
// expected over a single period `lead` periods ahead; the queue keeps the
// latest lead+1 estimates so horizon step k (k <= lead) is covered by the
// estimate issued lead-k periods ago — the one whose prediction window lines
// up with that step. Steps past the lead reuse the newest estimate, faded to
// zero at the horizon end; slots not yet filled after a reset contribute
// nothing.
class PreviewQueue {
 public:
  explicit PreviewQueue(int lead = 5);
  void push(const DisturbanceVec& estimate);
  std::vector<DisturbanceVec> horizon(int n_steps) const;
  int lead() const { return lead_; }
  void reset();

 private:
  int lead_;
  std::deque<DisturbanceVec> buf_;  // oldest first, size <= lead_ + 1
};

MpcProblem build_problem(const RobotState& state, const Pose& ee_estimate,
                         const TimedPlan& plan, double t,
                         const PreviewQueue& previews, const Vec5& u_prev,
                         const MpcParams& params);

// Minimizes sum_k ||e_k||^2_Q + ||du_k||^2_R over the linearized kinematic
// model (heading frozen at yaw0, previews added cumulatively to the predicted
// end-effector pose) subject to per-axis input bounds, via a condensed
// box-constrained QP solved by primal active-set iteration. Deterministic.
MpcSolution solve(const MpcProblem& problem);

// First-order low-pass split of a correction stream: the chassis takes the
// band below split_hz, the arm takes the exact remainder, so the two shares
// always sum to the input sample by sample.
class CommandDecomposer {
 public:
  CommandDecomposer(double split_hz, double dt);

  struct Shares {
    DisturbanceVec chassis;
    DisturbanceVec arm;
  };
  Shares step(const DisturbanceVec& total);
  void reset();

 private:
  double pole_;  // exp(-2*pi*split_hz*dt)
  DisturbanceVec chassis_state_;
};

// Separates persistent tracking error from single-period contact and sensor
// transients. Each controller period the measured error is compared with the
// error the last solution predicted for this instant; the innovation is
// admitted per axis only as the sign-consistent minimum of this period's and
// the previous period's innovation. A deviation that appears for one period
// and is gone the next (a wheel-contact draw, a vision outlier) is never
// chased — correcting it would land a period late and inject it back as fresh
// error — while a genuine offset repeats and passes through at full size on
// the second period.
class InnovationGate {
 public:
  // measured: current error from sensors. predicted: the error the previous
  // solve forecast for this period (its one-step-ahead prediction). The first
  // call has no forecast and passes the measurement through.
  DisturbanceVec step(const DisturbanceVec& measured,
                      const DisturbanceVec& predicted);
  void reset();

 private:
  DisturbanceVec prev_innovation_{DisturbanceVec::zero()};
  bool primed_{false};
};

// Keeps requested arm offsets inside the workspace box; whatever is cut off is
// remembered as carry for the chassis channel and counted.
class ArmAllocator {
 public:
  ArmAllocator(const Vec3& box_min, const Vec3& box_max)
      : box_min_(box_min), box_max_(box_max) {}

  Vec3 apply(const Vec3& requested_offset);

  const Vec3& carry() const { return carry_; }  // overflow from the last apply
  void consume_carry() { carry_.setZero(); }
  long reroute_count() const { return reroutes_; }

 private:
  Vec3 box_min_, box_max_;
  Vec3 carry_{Vec3::Zero()};
  long reroutes_{0};
};

}  // namespace terraprint

#endif
