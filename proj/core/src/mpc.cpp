#include "terraprint/mpc.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace terraprint {
namespace {

constexpr int kInputDim = 5;
constexpr int kErrDim = 6;
constexpr int kActiveSetCap = 200;
constexpr double kMultiplierTol = 1e-9;

double base_yaw(const Pose& pose) {
  const Quat& q = pose.orientation;
  return std::atan2(2.0 * (q.w() * q.z() + q.x() * q.y()),
                    1.0 - 2.0 * (q.y() * q.y() + q.z() * q.z()));
}

// Input-to-error directions: v advances the end effector along the frozen
// heading while the chassis rides the local surface, so the commanded speed
// also carries the climb rate of that surface (the body x axis's rise over
// horizontal run). Omega turns the yaw error; arm velocities move the end
// effector through the full base rotation. Scaled by per-channel effective
// integration times below.
Eigen::Matrix<double, 6, 5> input_directions(const MpcProblem& p) {
  const double yaw = base_yaw(p.x0.base);
  const Eigen::Matrix3d r_base = p.x0.base.orientation.toRotationMatrix();
  const Vec3 body_x = r_base.col(0);
  const double run = std::hypot(body_x.x(), body_x.y());
  const double climb = run > 0.1 ? body_x.z() / run : 0.0;
  Eigen::Matrix<double, 6, 5> g = Eigen::Matrix<double, 6, 5>::Zero();
  g(0, 0) = std::cos(yaw);
  g(1, 0) = std::sin(yaw);
  g(2, 0) = climb;
  g(5, 1) = 1.0;
  g.block<3, 3>(0, 2) = r_base;
  return g;
}

// How many steps decision input j is held through step k (hold after Nc).
int multiplicity(int k, int j, int nc) {
  if (j < nc - 1) return j <= k - 1 ? 1 : 0;
  return std::max(0, k - (nc - 1));
}

// Effective integration time of decision input j on the error at step k for a
// first-order channel: a command applied for m steps has moved the plant by
// u * (m dt - gamma (1-beta^m)/(1-beta)) plus the preceding inputs' tails;
// summed exactly, each input's coefficient only depends on how long ago it
// started. tau <= 0 degenerates to multiplicity * dt (instant actuation).
double lag_weight(int k, int j, int nc, double dt, double beta, double gamma) {
  if (gamma == 0.0) return multiplicity(k, j, nc) * dt;
  if (j < nc - 1)
    return j <= k - 1 ? dt - gamma * std::pow(beta, k - 1 - j) : 0.0;
  const int m = k - (nc - 1);
  if (m <= 0) return 0.0;
  return m * dt - gamma * (1.0 - std::pow(beta, m)) / (1.0 - beta);
}

// Coast displacement of the current actual rate v0 over k zero-command steps.
double coast_weight(int k, double beta, double gamma) {
  if (gamma == 0.0) return 0.0;
  return gamma * (1.0 - std::pow(beta, k)) / (1.0 - beta);
}

struct Condensed {
  Eigen::MatrixXd h;       // n x n, positive definite
  Eigen::VectorXd g;       // n
  Eigen::MatrixXd m;       // 6N x n prediction map
  Eigen::VectorXd c;       // 6N zero-input error trajectory
  Eigen::VectorXd lb, ub;  // box bounds
  Eigen::MatrixXd rbar;    // n x n input-rate weight (D' R D)
  Eigen::VectorXd uprev;   // n, u_prev in the first block
};

Condensed condense(const MpcProblem& p) {
  const int n_steps = p.params.horizon;
  const int nc = p.params.control_horizon;
  const int n = kInputDim * nc;
  const Eigen::Matrix<double, 6, 5> g_dir = input_directions(p);
  const double yaw = base_yaw(p.x0.base);
  const Eigen::Matrix3d rz =
      Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  const double dt = p.params.dt;
  const double bv = p.params.beta_v(), gv = p.params.gamma_v();
  const double bw = p.params.beta_omega(), gw = p.params.gamma_omega();
  const double arm_dt = p.params.arm_response * dt;

  Condensed qp;
  qp.m = Eigen::MatrixXd::Zero(kErrDim * n_steps, n);
  qp.c = Eigen::VectorXd::Zero(kErrDim * n_steps);

  // Zero-input error: current pose held except for the coasting actual rates,
  // previews accumulating, reference marching on. Previews arrive in the
  // chassis yaw frame.
  Eigen::Matrix<double, 6, 1> drift = Eigen::Matrix<double, 6, 1>::Zero();
  for (int k = 1; k <= n_steps; ++k) {
    const DisturbanceVec& pv = p.previews[size_t(k - 1)];
    drift.head<3>() += rz * pv.dp;
    drift.tail<3>() += rz * pv.dr;
    const Pose& ref = p.reference[size_t(k - 1)];
    Eigen::Matrix<double, 6, 1> ck;
    ck.head<3>() = p.ee0.position - ref.position;
    ck.tail<3>() =
        rotation_log(p.ee0.orientation * ref.orientation.conjugate());
    ck += g_dir.col(0) * (coast_weight(k, bv, gv) * p.x0.v);
    ck += g_dir.col(1) * (coast_weight(k, bw, gw) * p.x0.omega);
    qp.c.segment<kErrDim>(kErrDim * (k - 1)) = ck + drift;
    for (int j = 0; j < nc; ++j) {
      Eigen::Matrix<double, 6, 5> gj;
      gj.col(0) = g_dir.col(0) * lag_weight(k, j, nc, dt, bv, gv);
      gj.col(1) = g_dir.col(1) * lag_weight(k, j, nc, dt, bw, gw);
      gj.rightCols<3>() =
          g_dir.rightCols<3>() * (multiplicity(k, j, nc) * arm_dt);
      if (!gj.isZero(0.0))
        qp.m.block<kErrDim, kInputDim>(kErrDim * (k - 1), kInputDim * j) = gj;
    }
  }

  // Block-bidiagonal difference operator for the input-rate penalty.
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(n, n);
  for (int j = 1; j < nc; ++j)
    d.block<kInputDim, kInputDim>(kInputDim * j, kInputDim * (j - 1)) =
        -Eigen::Matrix<double, 5, 5>::Identity();
  Eigen::VectorXd r_rep(n);
  for (int j = 0; j < nc; ++j)
    r_rep.segment<kInputDim>(kInputDim * j) = p.params.r_diag;
  qp.rbar = d.transpose() * r_rep.asDiagonal() * d;

  Eigen::VectorXd q_rep(kErrDim * n_steps);
  for (int k = 0; k < n_steps; ++k)
    q_rep.segment<kErrDim>(kErrDim * k) = p.params.q_diag;

  qp.uprev = Eigen::VectorXd::Zero(n);
  qp.uprev.head<kInputDim>() = p.u_prev;

  // Absolute input penalty over all n_steps predicted steps; the last decision
  // block is weighted by its hold length so the tail cannot hide free motion.
  Eigen::VectorXd abs_rep(n);
  for (int j = 0; j < nc; ++j) {
    const double hold = j == nc - 1 ? double(n_steps - nc + 1) : 1.0;
    abs_rep.segment<kInputDim>(kInputDim * j) = hold * p.params.r_abs_diag;
  }

  qp.h = qp.m.transpose() * q_rep.asDiagonal() * qp.m + qp.rbar;
  qp.h += Eigen::MatrixXd(abs_rep.asDiagonal());
  qp.g = qp.m.transpose() * (q_rep.asDiagonal() * qp.c) -
         d.transpose() * (r_rep.asDiagonal() * qp.uprev);

  qp.lb.resize(n);
  qp.ub.resize(n);
  Vec5 hi;
  hi << p.params.v_bound, p.params.omega_bound, p.params.arm_vel_bound,
      p.params.arm_vel_bound, p.params.arm_vel_bound;
  for (int j = 0; j < nc; ++j) {
    qp.ub.segment<kInputDim>(kInputDim * j) = hi;
    qp.lb.segment<kInputDim>(kInputDim * j) = -hi;
  }
  return qp;
}

// Primal active-set iteration for min u'Hu + 2g'u subject to lb <= u <= ub.
// Ties break on the lowest index; iterate stays feasible throughout.
Eigen::VectorXd solve_box_qp(const Condensed& qp, int* active_out,
                             int* iters_out, bool* fallback_out) {
  const long n = qp.h.rows();
  enum class Bound : char { free, lower, upper };
  std::vector<Bound> state(size_t(n), Bound::free);

  auto clamped_newton = [&]() {
    Eigen::VectorXd u = qp.h.ldlt().solve(-qp.g);
    for (long i = 0; i < n; ++i)
      u[i] = std::min(qp.ub[i], std::max(qp.lb[i], u[i]));
    return u;
  };

  Eigen::VectorXd u = clamped_newton();
  for (long i = 0; i < n; ++i) {
    if (u[i] <= qp.lb[i]) state[size_t(i)] = Bound::lower;
    else if (u[i] >= qp.ub[i]) state[size_t(i)] = Bound::upper;
  }

  int iters = 0;
  for (; iters < kActiveSetCap; ++iters) {
    std::vector<long> free_ids;
    free_ids.reserve(size_t(n));
    for (long i = 0; i < n; ++i)
      if (state[size_t(i)] == Bound::free) free_ids.push_back(i);

    // Equality-constrained step with bound variables pinned.
    Eigen::VectorXd target = u;
    if (!free_ids.empty()) {
      const long nf = long(free_ids.size());
      Eigen::MatrixXd hff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (long a = 0; a < nf; ++a) {
        rhs[a] = -qp.g[free_ids[size_t(a)]];
        for (long b = 0; b < nf; ++b)
          hff(a, b) = qp.h(free_ids[size_t(a)], free_ids[size_t(b)]);
      }
      for (long i = 0; i < n; ++i)
        if (state[size_t(i)] != Bound::free)
          for (long a = 0; a < nf; ++a)
            rhs[a] -= qp.h(free_ids[size_t(a)], i) * u[i];
      const Eigen::VectorXd uf = hff.ldlt().solve(rhs);
      for (long a = 0; a < nf; ++a) target[free_ids[size_t(a)]] = uf[a];
    }

    // Step toward the equality solution until the first bound blocks.
    double alpha = 1.0;
    long blocker = -1;
    bool to_upper = false;
    for (long i : free_ids) {
      const double delta = target[i] - u[i];
      if (delta > 0 && target[i] > qp.ub[i]) {
        const double a = (qp.ub[i] - u[i]) / delta;
        if (a < alpha - 1e-15) { alpha = a; blocker = i; to_upper = true; }
      } else if (delta < 0 && target[i] < qp.lb[i]) {
        const double a = (qp.lb[i] - u[i]) / delta;
        if (a < alpha - 1e-15) { alpha = a; blocker = i; to_upper = false; }
      }
    }

    if (blocker >= 0) {
      for (long i : free_ids) u[i] += alpha * (target[i] - u[i]);
      u[blocker] = to_upper ? qp.ub[blocker] : qp.lb[blocker];
      state[size_t(blocker)] = to_upper ? Bound::upper : Bound::lower;
      continue;
    }

    u = target;

    // Full step taken: release the worst wrong-sign multiplier, if any.
    const Eigen::VectorXd grad = 2.0 * (qp.h * u + qp.g);
    long release = -1;
    double worst = -kMultiplierTol;
    for (long i = 0; i < n; ++i) {
      double mu = 0.0;
      if (state[size_t(i)] == Bound::upper) mu = -grad[i];
      else if (state[size_t(i)] == Bound::lower) mu = grad[i];
      else continue;
      if (mu < worst) { worst = mu; release = i; }
    }
    if (release < 0) break;  // KKT satisfied
    state[size_t(release)] = Bound::free;
  }

  if (iters >= kActiveSetCap) {
    *fallback_out = true;
    u = clamped_newton();
  }
  int active = 0;
  for (long i = 0; i < n; ++i)
    if (u[i] <= qp.lb[i] + 1e-12 || u[i] >= qp.ub[i] - 1e-12) ++active;
  *active_out = active;
  *iters_out = iters;
  return u;
}

}  // namespace

void MpcParams::validate() const {
  if (control_horizon < 1 || horizon < control_horizon)
    throw std::invalid_argument("horizon must satisfy N >= Nc >= 1");
  if (dt <= 0.0) throw std::invalid_argument("mpc dt must be positive");
  if ((q_diag.array() < 0.0).any())
    throw std::invalid_argument("error weights must be nonnegative");
  if ((r_diag.array() <= 0.0).any())
    throw std::invalid_argument("input-rate weights must be positive");
  if ((r_abs_diag.array() < 0.0).any())
    throw std::invalid_argument("input magnitude weights must be nonnegative");
  if (v_bound <= 0.0 || omega_bound <= 0.0 || arm_vel_bound <= 0.0)
    throw std::invalid_argument("input bounds must be positive");
  if (preview_valid < 0.0)
    throw std::invalid_argument("preview validity must be nonnegative");
  if (preview_clamp <= 0.0)
    throw std::invalid_argument("preview clamp must be positive");
  if (tau_v < 0.0 || tau_omega < 0.0)
    throw std::invalid_argument("actuation time constants must be nonnegative");
  if (arm_response <= 0.0 || arm_response > 1.0)
    throw std::invalid_argument("arm response fraction must be in (0, 1]");
}

PreviewQueue::PreviewQueue(int lead) : lead_(std::max(0, lead)) {}

void PreviewQueue::push(const DisturbanceVec& estimate) {
  buf_.push_back(estimate);
  while (int(buf_.size()) > lead_ + 1) buf_.pop_front();
}

void PreviewQueue::reset() { buf_.clear(); }

std::vector<DisturbanceVec> PreviewQueue::horizon(int n_steps) const {
  std::vector<DisturbanceVec> out;
  out.reserve(size_t(std::max(0, n_steps)));
  const DisturbanceVec newest =
      buf_.empty() ? DisturbanceVec::zero() : buf_.back();
  for (int k = 0; k < n_steps; ++k) {
    if (k <= lead_) {
      // The estimate issued lead-k periods ago targeted exactly this step.
      const long idx = long(buf_.size()) - 1 - (lead_ - k);
      out.push_back(idx >= 0 ? buf_[size_t(idx)] : DisturbanceVec::zero());
    } else {
      // Past the newest estimate's window: reuse it, fading to zero at the
      // horizon end.
      const double w =
          double(n_steps - 1 - k) / double(n_steps - 1 - lead_);
      out.push_back(w * newest);
    }
  }
  return out;
}

MpcProblem build_problem(const RobotState& state, const Pose& ee_estimate,
                         const TimedPlan& plan, double t,
                         const PreviewQueue& previews, const Vec5& u_prev,
                         const MpcParams& params) {
  params.validate();
  MpcProblem p;
  p.x0 = state;
  p.ee0 = ee_estimate;
  p.u_prev = u_prev;
  p.params = params;
  p.ref_now = plan.reference(t);
  p.reference.reserve(size_t(params.horizon));
  for (int k = 1; k <= params.horizon; ++k)
    p.reference.push_back(plan.reference(t + params.dt * k));
  p.previews = previews.horizon(params.horizon);
  return p;
}

MpcSolution solve(const MpcProblem& problem) {
  const auto t0 = std::chrono::steady_clock::now();
  problem.params.validate();
  const int n_steps = problem.params.horizon;
  const int nc = problem.params.control_horizon;
  if (long(problem.reference.size()) != n_steps ||
      long(problem.previews.size()) != n_steps)
    throw std::invalid_argument("reference/preview length must equal the horizon");

  const Condensed qp = condense(problem);

  MpcSolution sol;
  const Eigen::VectorXd u =
      solve_box_qp(qp, &sol.active_constraints, &sol.iterations, &sol.fallback);

  sol.u_seq.resize(size_t(nc));
  for (int j = 0; j < nc; ++j) sol.u_seq[size_t(j)] = u.segment<kInputDim>(kInputDim * j);

  const Eigen::VectorXd e = qp.c + qp.m * u;
  sol.predicted_errors.resize(size_t(n_steps));
  for (int k = 0; k < n_steps; ++k)
    sol.predicted_errors[size_t(k)] =
        DisturbanceVec::from_vector(e.segment<kErrDim>(kErrDim * k));

  double cost = 0.0;
  for (int k = 0; k < n_steps; ++k)
    cost += e.segment<kErrDim>(kErrDim * k)
                .cwiseProduct(problem.params.q_diag)
                .dot(e.segment<kErrDim>(kErrDim * k));
  Eigen::VectorXd prev = problem.u_prev;
  for (int j = 0; j < nc; ++j) {
    const Eigen::VectorXd uj = u.segment<kInputDim>(kInputDim * j);
    const Eigen::VectorXd du = uj - prev;
    cost += du.cwiseProduct(problem.params.r_diag).dot(du);
    const double hold = j == nc - 1 ? double(n_steps - nc + 1) : 1.0;
    cost += hold * uj.cwiseProduct(problem.params.r_abs_diag).dot(uj);
    prev = uj;
  }
  sol.cost = cost;

  sol.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return sol;
}

CommandDecomposer::CommandDecomposer(double split_hz, double dt) {
  if (split_hz <= 0.0 || dt <= 0.0)
    throw std::invalid_argument("split frequency and dt must be positive");
  pole_ = std::exp(-2.0 * std::numbers::pi * split_hz * dt);
}

namespace {

// Split x into (chassis, arm) with chassis as close to `target` as rounding
// allows while chassis + arm reconstructs x bit-exactly: the arm share absorbs
// the rounding slack (at most a few ulp, far below any physical scale).
void split_exact(double x, double target, double& chassis, double& arm) {
  arm = x - target;
  chassis = x - arm;
  for (int i = 0; i < 8 && chassis + arm != x; ++i) arm += x - (chassis + arm);
  if (chassis + arm != x) {
    chassis = 0.0;  // trivially exact last resort; unreachable in practice
    arm = x;
  }
}

}  // namespace

namespace {

double sign_consistent_min(double a, double b) {
  if (a > 0.0 && b > 0.0) return std::min(a, b);
  if (a < 0.0 && b < 0.0) return std::max(a, b);
  return 0.0;
}

}  // namespace

DisturbanceVec InnovationGate::step(const DisturbanceVec& measured,
                                    const DisturbanceVec& predicted) {
  if (!primed_) {
    primed_ = true;
    prev_innovation_ = DisturbanceVec::zero();
    return measured;
  }
  const DisturbanceVec innovation = measured - predicted;
  DisturbanceVec admitted;
  for (int i = 0; i < 3; ++i) {
    admitted.dp[i] =
        sign_consistent_min(innovation.dp[i], prev_innovation_.dp[i]);
    admitted.dr[i] =
        sign_consistent_min(innovation.dr[i], prev_innovation_.dr[i]);
  }
  prev_innovation_ = innovation;
  return predicted + admitted;
}

void InnovationGate::reset() {
  prev_innovation_ = DisturbanceVec::zero();
  primed_ = false;
}

CommandDecomposer::Shares CommandDecomposer::step(const DisturbanceVec& total) {
  chassis_state_ = pole_ * chassis_state_ + (1.0 - pole_) * total;
  Shares s;
  for (int i = 0; i < 3; ++i) {
    split_exact(total.dp[i], chassis_state_.dp[i], s.chassis.dp[i], s.arm.dp[i]);
    split_exact(total.dr[i], chassis_state_.dr[i], s.chassis.dr[i], s.arm.dr[i]);
  }
  return s;
}

void CommandDecomposer::reset() { chassis_state_ = DisturbanceVec::zero(); }

Vec3 ArmAllocator::apply(const Vec3& requested_offset) {
  const Vec3 clamped = requested_offset.cwiseMax(box_min_).cwiseMin(box_max_);
  carry_ = requested_offset - clamped;
  if (carry_.squaredNorm() > 0.0) ++reroutes_;
  return clamped;
}

}  // namespace terraprint
