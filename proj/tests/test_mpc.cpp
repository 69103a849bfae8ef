#include "terraprint/mpc.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "terraprint/rng.hpp"

using namespace terraprint;

namespace {

// Hold-aware input lookup into the flattened decision vector.
Vec5 input_at(const Eigen::VectorXd& u_flat, int k, int nc) {
  return u_flat.segment<5>(5 * std::min(k, nc - 1));
}

// Independent prediction rollout: a per-step state-space simulation of the
// commanded motion through the first-order chassis response (chassis speed and
// turn rate relax toward each zero-order-held command; the arm re-targets
// every period and delivers its response fraction with no memory), previews
// layered on top, then comparison against each reference. Deliberately a
// recursion rather than the solver's closed-form coefficients. Returns the
// stacked 6N error vector.
Eigen::VectorXd rollout_errors(const MpcProblem& p, const Eigen::VectorXd& u_flat) {
  const int n = p.params.horizon;
  const int nc = p.params.control_horizon;
  const double dt = p.params.dt;
  const Vec3 rpy = to_rpy(p.x0.base.orientation);
  const Eigen::Matrix3d r_base = p.x0.base.orientation.toRotationMatrix();
  // Driving advances along the yaw heading and climbs with the surface the
  // chassis sits on (body x rise over horizontal run).
  const Vec3 body_x = r_base.col(0);
  const double climb = body_x.z() / std::hypot(body_x.x(), body_x.y());
  const Vec3 heading(std::cos(rpy.z()), std::sin(rpy.z()), climb);
  const Eigen::Matrix3d r_yaw = yaw_rotation(rpy.z()).toRotationMatrix();
  const double bv = p.params.beta_v(), gv = p.params.gamma_v();
  const double bw = p.params.beta_omega(), gw = p.params.gamma_omega();

  Vec3 pos = p.ee0.position;
  Vec3 rot_acc = Vec3::Zero();
  double v_act = p.x0.v;
  double w_act = p.x0.omega;
  Eigen::VectorXd e(6 * n);
  for (int k = 0; k < n; ++k) {
    const Vec5 u = input_at(u_flat, k, nc);
    // Exact displacement of a first-order lag over one period of held input:
    // u dt minus the part the lag has not yet delivered.
    pos += (u[0] * dt - gv * (u[0] - v_act)) * heading;
    pos += r_base * (p.params.arm_response * dt * u.tail<3>());
    rot_acc += (u[1] * dt - gw * (u[1] - w_act)) * Vec3::UnitZ();
    v_act = bv * v_act + (1.0 - bv) * u[0];
    w_act = bw * w_act + (1.0 - bw) * u[1];
    pos += r_yaw * p.previews[size_t(k)].dp;
    rot_acc += r_yaw * p.previews[size_t(k)].dr;
    e.segment<3>(6 * k) = pos - p.reference[size_t(k)].position;
    e.segment<3>(6 * k + 3) =
        rotation_log(p.ee0.orientation *
                     p.reference[size_t(k)].orientation.conjugate()) +
        rot_acc;
  }
  return e;
}

double hold_weight(const MpcParams& params, int j) {
  return j == params.control_horizon - 1
             ? double(params.horizon - params.control_horizon + 1)
             : 1.0;
}

double total_cost(const MpcProblem& p, const Eigen::VectorXd& u_flat) {
  const Eigen::VectorXd e = rollout_errors(p, u_flat);
  double cost = 0.0;
  for (int k = 0; k < p.params.horizon; ++k)
    cost += e.segment<6>(6 * k).cwiseProduct(p.params.q_diag).dot(e.segment<6>(6 * k));
  Eigen::VectorXd prev = p.u_prev;
  for (int j = 0; j < p.params.control_horizon; ++j) {
    const Eigen::VectorXd uj = u_flat.segment<5>(5 * j);
    const Eigen::VectorXd du = uj - prev;
    cost += du.cwiseProduct(p.params.r_diag).dot(du);
    cost += hold_weight(p.params, j) * uj.cwiseProduct(p.params.r_abs_diag).dot(uj);
    prev = uj;
  }
  return cost;
}

// Closed-form least-squares optimum via a stacked QR factorization, with the
// prediction map built column by column from unit-input rollouts.
Eigen::VectorXd least_squares_oracle(const MpcProblem& p) {
  const int n = p.params.horizon;
  const int nc = p.params.control_horizon;
  const int nu = 5 * nc;

  const Eigen::VectorXd c = rollout_errors(p, Eigen::VectorXd::Zero(nu));
  Eigen::MatrixXd m(6 * n, nu);
  for (int j = 0; j < nu; ++j) {
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(nu);
    unit[j] = 1.0;
    m.col(j) = rollout_errors(p, unit) - c;
  }

  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(nu, nu);
  for (int j = 1; j < nc; ++j)
    d.block<5, 5>(5 * j, 5 * (j - 1)) = -Eigen::Matrix<double, 5, 5>::Identity();
  Eigen::VectorXd uprev = Eigen::VectorXd::Zero(nu);
  uprev.head<5>() = p.u_prev;

  Eigen::VectorXd sq(6 * n), sr(nu), sa(nu);
  for (int k = 0; k < n; ++k)
    sq.segment<6>(6 * k) = p.params.q_diag.cwiseSqrt();
  for (int j = 0; j < nc; ++j) {
    sr.segment<5>(5 * j) = p.params.r_diag.cwiseSqrt();
    sa.segment<5>(5 * j) =
        (hold_weight(p.params, j) * p.params.r_abs_diag).cwiseSqrt();
  }

  Eigen::MatrixXd a(6 * n + 2 * nu, nu);
  a.topRows(6 * n) = sq.asDiagonal() * m;
  a.middleRows(6 * n, nu) = sr.asDiagonal() * d;
  a.bottomRows(nu) = Eigen::MatrixXd(sa.asDiagonal());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(6 * n + 2 * nu);
  rhs.head(6 * n) = -(sq.asDiagonal() * c);
  rhs.segment(6 * n, nu) = sr.asDiagonal() * uprev;
  return a.colPivHouseholderQr().solve(rhs);
}

// A stationary problem: end effector sitting exactly on a fixed reference.
MpcProblem stationary_problem() {
  MpcProblem p;
  p.ee0.position = Vec3(1.0, 2.0, 0.1);
  p.ref_now = p.ee0;
  p.reference.assign(size_t(p.params.horizon), p.ee0);
  p.previews.assign(size_t(p.params.horizon), DisturbanceVec::zero());
  return p;
}

MpcProblem random_problem(RngStream& rng, double bound_scale) {
  MpcProblem p;
  p.params.v_bound = 1.0 * bound_scale;
  p.params.omega_bound = 1.0 * bound_scale;
  p.params.arm_vel_bound = 0.2 * bound_scale;

  const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
  p.x0.base.orientation =
      from_rpy(rng.uniform(-0.09, 0.09), rng.uniform(-0.09, 0.09), yaw);
  p.x0.base.position = Vec3(rng.normal(1.0), rng.normal(1.0), rng.normal(0.1));
  p.x0.v = rng.uniform(-0.3, 0.3);
  p.x0.omega = rng.uniform(-0.3, 0.3);
  p.ee0.position = p.x0.base.position + Vec3(rng.normal(0.1), rng.normal(0.1), rng.normal(0.05));
  p.ee0.orientation = rotation_exp(Vec3(rng.normal(0.02), rng.normal(0.02),
                                        rng.normal(0.02))) *
                      p.x0.base.orientation;
  p.u_prev << rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
      rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1);

  Pose ref = p.ee0;
  ref.position += Vec3(rng.normal(0.01), rng.normal(0.01), rng.normal(0.01));
  for (int k = 0; k < p.params.horizon; ++k) {
    ref.position += Vec3(rng.normal(0.01), rng.normal(0.01), rng.normal(0.003));
    ref.orientation = rotation_exp(Vec3(rng.normal(0.003), rng.normal(0.003),
                                        rng.normal(0.003))) *
                      ref.orientation;
    p.reference.push_back(ref);
    p.previews.push_back(DisturbanceVec{
        Vec3(rng.normal(0.002), rng.normal(0.002), rng.normal(0.002)),
        Vec3(rng.normal(0.001), rng.normal(0.001), rng.normal(0.001))});
  }
  p.ref_now = p.ee0;
  return p;
}

}  // namespace

TEST_CASE("stationary problem solves to zero input and zero cost") {
  const MpcSolution sol = solve(stationary_problem());
  REQUIRE(sol.u_seq.size() == 5);
  for (const Vec5& u : sol.u_seq) CHECK(u.norm() == 0.0);
  CHECK(sol.cost == 0.0);
  CHECK_FALSE(sol.fallback);
  for (const auto& e : sol.predicted_errors) CHECK(e.norm() == 0.0);
}

TEST_CASE("wide-bound solutions match the least-squares oracle") {
  RngStream rng(0x9a11);
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const MpcProblem p = random_problem(rng, 10.0);
    const MpcSolution sol = solve(p);
    CHECK_FALSE(sol.fallback);
    CHECK(sol.active_constraints == 0);

    const Eigen::VectorXd oracle = least_squares_oracle(p);
    Eigen::VectorXd mine(5 * p.params.control_horizon);
    for (int j = 0; j < p.params.control_horizon; ++j)
      mine.segment<5>(5 * j) = sol.u_seq[size_t(j)];
    worst = std::max(worst, (mine - oracle).cwiseAbs().maxCoeff());
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(worst < 1e-6);
  CHECK(elapsed < 5.0);
}

TEST_CASE("a half-metre reference jump saturates the speed bound exactly") {
  MpcProblem p = stationary_problem();
  for (auto& ref : p.reference) ref.position.x() += 0.5;
  p.ref_now.position.x() += 0.5;
  const MpcSolution sol = solve(p);
  CHECK(sol.u_seq[0][0] == 1.0);
  CHECK(sol.active_constraints > 0);
}

TEST_CASE("inputs always respect the bounds") {
  RngStream rng(0x77);
  for (int trial = 0; trial < 50; ++trial) {
    MpcProblem p = random_problem(rng, 1.0);
    // Exaggerate some errors so saturation actually happens.
    if (trial % 2 == 0)
      for (auto& ref : p.reference) ref.position += Vec3(0.4, -0.3, 0.2);
    const MpcSolution sol = solve(p);
    for (const Vec5& u : sol.u_seq) {
      CHECK(std::abs(u[0]) <= p.params.v_bound + 1e-12);
      CHECK(std::abs(u[1]) <= p.params.omega_bound + 1e-12);
      for (int i = 2; i < 5; ++i)
        CHECK(std::abs(u[i]) <= p.params.arm_vel_bound + 1e-12);
    }
  }
}

TEST_CASE("optimal cost never exceeds the zero-input cost") {
  RngStream rng(0xbeef);
  for (int trial = 0; trial < 30; ++trial) {
    const MpcProblem p = random_problem(rng, 1.0);
    const MpcSolution sol = solve(p);
    const double zero_cost = total_cost(p, Eigen::VectorXd::Zero(25));
    CHECK(sol.cost <= zero_cost * (1.0 + 1e-12) + 1e-12);
  }
}

TEST_CASE("identical problems solve bit-identically") {
  RngStream rng(0x51);
  const MpcProblem p = random_problem(rng, 1.0);
  const MpcSolution a = solve(p);
  const MpcSolution b = solve(p);
  CHECK(a.cost == b.cost);
  for (size_t j = 0; j < a.u_seq.size(); ++j)
    CHECK((a.u_seq[j] - b.u_seq[j]).norm() == 0.0);
}

TEST_CASE("solver cost matches an independent evaluation") {
  RngStream rng(0x88);
  for (int trial = 0; trial < 10; ++trial) {
    const MpcProblem p = random_problem(rng, 10.0);
    const MpcSolution sol = solve(p);
    Eigen::VectorXd mine(25);
    for (int j = 0; j < 5; ++j) mine.segment<5>(5 * j) = sol.u_seq[size_t(j)];
    CHECK(sol.cost == doctest::Approx(total_cost(p, mine)).epsilon(1e-9));
  }
}

TEST_CASE("preview queue lines estimates up with their horizon step") {
  PreviewQueue q(5);

  // Nothing pushed yet: the whole horizon is zero.
  for (const auto& pv : q.horizon(10)) CHECK(pv.norm() == 0.0);

  // Push six estimates with distinct z values 1..6 mm. The oldest (1 mm) was
  // issued five periods ago, so it covers step 0; the newest (6 mm) covers
  // step 5 and fades linearly to zero at the horizon end.
  for (int i = 1; i <= 6; ++i) {
    DisturbanceVec d;
    d.dp.z() = 1e-3 * double(i);
    q.push(d);
  }
  const auto pv = q.horizon(10);
  REQUIRE(pv.size() == 10);
  for (int k = 0; k <= 5; ++k)
    CHECK(pv[size_t(k)].dp.z() == doctest::Approx(1e-3 * (k + 1)).epsilon(1e-12));
  for (int k = 6; k < 10; ++k) {
    const double expect = 6e-3 * double(9 - k) / 4.0;
    CHECK(pv[size_t(k)].dp.z() == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(pv[9].norm() == 0.0);

  // Partially filled after reset: steps whose issuing period predates the
  // reset stay zero.
  q.reset();
  DisturbanceVec d;
  d.dp.z() = 5e-3;
  q.push(d);
  const auto pare = q.horizon(10);
  for (int k = 0; k < 5; ++k) CHECK(pare[size_t(k)].norm() == 0.0);
  CHECK(pare[5].dp.z() == doctest::Approx(5e-3).epsilon(1e-12));
}

TEST_CASE("build_problem fills references and previews") {
  const TerrainField field = TerrainField::build(TerrainSpec{});
  std::vector<Pose> wps(2);
  wps[0].position = Vec3(0.0, 0.0, 0.1);
  wps[1].position = Vec3(4.0, 0.0, 0.1);
  const TimedPlan plan = build_plan(wps, field, PlannerConfig{});

  RobotState state;
  state.base.position = Vec3(-0.6, 0.0, 0.0);
  const Pose ee = end_effector_pose(state, Vec3(0.6, 0.0, 0.1));

  // A saturated queue holding a constant estimate.
  PreviewQueue q(5);
  DisturbanceVec d;
  d.dp.z() = 2e-3;
  for (int i = 0; i < 6; ++i) q.push(d);

  const MpcParams params;
  const MpcProblem p =
      build_problem(state, ee, plan, 0.0, q, Vec5::Zero(), params);

  REQUIRE(p.reference.size() == 10);
  REQUIRE(p.previews.size() == 10);
  // First six previews carry the estimate verbatim; the tail decays linearly
  // to zero.
  for (int k = 0; k <= 5; ++k) {
    CHECK(p.previews[size_t(k)].dp.z() == doctest::Approx(2e-3).epsilon(1e-12));
  }
  for (int k = 6; k < 10; ++k) {
    const double expect = 2e-3 * double(9 - k) / 4.0;
    CHECK(p.previews[size_t(k)].dp.z() == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(p.previews[9].norm() == 0.0);

  // On the reference at t=0: zero initial error.
  CHECK(pose_error(p.ref_now, p.ee0).norm() < 1e-12);

  // References march forward along the path.
  CHECK(p.reference[9].position.x() > p.reference[0].position.x());

  // Empty queue: previews vanish.
  const MpcProblem pz =
      build_problem(state, ee, plan, 0.0, PreviewQueue(5), Vec5::Zero(), params);
  for (const auto& pv : pz.previews) CHECK(pv.norm() == 0.0);
}

TEST_CASE("parameter validation rejects bad settings") {
  MpcParams p;
  p.control_horizon = 12;
  CHECK_THROWS(p.validate());
  p = MpcParams{};
  p.r_diag[2] = 0.0;
  CHECK_THROWS(p.validate());
  p = MpcParams{};
  p.q_diag[0] = -1.0;
  CHECK_THROWS(p.validate());
  p = MpcParams{};
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("decomposer: DC input converges to the chassis within 1%") {
  CommandDecomposer dec(1.0, 0.1);
  DisturbanceVec c;
  c.dp = Vec3(0.01, -0.02, 0.03);
  CommandDecomposer::Shares s;
  for (int i = 0; i < 8; ++i) s = dec.step(c);  // 5 time constants at 10 Hz
  CHECK((s.chassis.dp - c.dp).norm() < 0.01 * c.dp.norm());
  CHECK(s.arm.dp.norm() < 0.01 * c.dp.norm());
}

TEST_CASE("decomposer: 4 Hz content attenuates to the first-order response") {
  const double dt = 0.01;
  CommandDecomposer dec(1.0, dt);
  double sum_sin = 0.0, sum_cos = 0.0;
  long count = 0;
  for (long k = 0; k * dt < 5.0; ++k) {
    const double t = k * dt;
    DisturbanceVec in;
    in.dp.z() = std::sin(2.0 * std::numbers::pi * 4.0 * t);
    const auto s = dec.step(in);
    if (t >= 1.0) {  // skip the startup transient, then 16 whole cycles
      sum_sin += s.chassis.dp.z() * std::sin(2.0 * std::numbers::pi * 4.0 * t);
      sum_cos += s.chassis.dp.z() * std::cos(2.0 * std::numbers::pi * 4.0 * t);
      ++count;
    }
  }
  const double amplitude =
      2.0 * std::sqrt(sum_sin * sum_sin + sum_cos * sum_cos) / double(count);
  CHECK(amplitude == doctest::Approx(0.243).epsilon(0.05));
}

TEST_CASE("decomposer shares reconstruct the input exactly") {
  CommandDecomposer dec(1.0, 0.1);
  RngStream rng(3);
  for (int k = 0; k < 2000; ++k) {
    DisturbanceVec in;
    in.dp = Vec3(rng.normal(0.01), rng.normal(0.01), rng.normal(0.01));
    in.dr = Vec3(rng.normal(0.002), rng.normal(0.002), rng.normal(0.002));
    const auto s = dec.step(in);
    const DisturbanceVec sum = s.chassis + s.arm;
    CHECK(sum.dp.x() == in.dp.x());
    CHECK(sum.dp.y() == in.dp.y());
    CHECK(sum.dp.z() == in.dp.z());
    CHECK(sum.dr.x() == in.dr.x());
    CHECK(sum.dr.y() == in.dr.y());
    CHECK(sum.dr.z() == in.dr.z());
  }
}

TEST_CASE("innovation gate passes the first measurement through unchanged") {
  InnovationGate gate;
  DisturbanceVec m;
  m.dp = Vec3(0.004, -0.002, 0.003);
  m.dr = Vec3(0.001, 0.0, -0.001);
  const DisturbanceVec out = gate.step(m, DisturbanceVec::zero());
  CHECK((out - m).norm() == 0.0);
}

TEST_CASE("innovation gate never admits a single-period pulse") {
  InnovationGate gate;
  gate.step(DisturbanceVec::zero(), DisturbanceVec::zero());  // prime

  // A one-period deviation: appears once, gone the next period.
  DisturbanceVec pulse;
  pulse.dp.z() = 0.004;
  const DisturbanceVec during =
      gate.step(pulse, DisturbanceVec::zero());
  CHECK(during.norm() == 0.0);
  const DisturbanceVec after =
      gate.step(DisturbanceVec::zero(), DisturbanceVec::zero());
  CHECK(after.norm() == 0.0);
}

TEST_CASE("innovation gate admits a persistent offset on its second period") {
  InnovationGate gate;
  gate.step(DisturbanceVec::zero(), DisturbanceVec::zero());

  DisturbanceVec offset;
  offset.dp.z() = 0.010;
  CHECK(gate.step(offset, DisturbanceVec::zero()).norm() == 0.0);
  const DisturbanceVec second = gate.step(offset, DisturbanceVec::zero());
  CHECK(second.dp.z() == doctest::Approx(0.010).epsilon(1e-12));
  // And keeps passing it while it persists.
  const DisturbanceVec third = gate.step(offset, DisturbanceVec::zero());
  CHECK(third.dp.z() == doctest::Approx(0.010).epsilon(1e-12));
}

TEST_CASE("innovation gate admits the sign-consistent minimum per axis") {
  InnovationGate gate;
  gate.step(DisturbanceVec::zero(), DisturbanceVec::zero());

  DisturbanceVec a, b;
  a.dp = Vec3(0.004, -0.003, 0.002);   // x persists smaller, y flips, z grows
  b.dp = Vec3(0.001, 0.003, 0.005);
  gate.step(a, DisturbanceVec::zero());
  const DisturbanceVec out = gate.step(b, DisturbanceVec::zero());
  CHECK(out.dp.x() == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(out.dp.y() == 0.0);
  CHECK(out.dp.z() == doctest::Approx(0.002).epsilon(1e-12));
}

TEST_CASE("innovation gate measures against the forecast, not zero") {
  InnovationGate gate;
  gate.step(DisturbanceVec::zero(), DisturbanceVec::zero());

  // The forecast expects 3 mm; the measurement delivers exactly that twice.
  // No innovation, so the admitted error is the forecast itself.
  DisturbanceVec forecast;
  forecast.dp.x() = 0.003;
  gate.step(forecast, forecast);
  const DisturbanceVec out = gate.step(forecast, forecast);
  CHECK((out - forecast).norm() == 0.0);
}

TEST_CASE("arm allocator clamps to the workspace and reroutes the overflow") {
  ArmAllocator alloc(Vec3(-0.3, -0.3, -0.15), Vec3(0.3, 0.3, 0.15));

  const Vec3 inside = alloc.apply(Vec3(0.0, 0.0, 0.10));
  CHECK((inside - Vec3(0.0, 0.0, 0.10)).norm() == 0.0);
  CHECK(alloc.carry().norm() == 0.0);
  CHECK(alloc.reroute_count() == 0);

  const Vec3 over = alloc.apply(Vec3(0.0, 0.0, 0.20));
  CHECK(over.z() == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(alloc.carry().z() == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(alloc.reroute_count() == 1);

  alloc.apply(Vec3(0.5, 0.0, 0.0));
  CHECK(alloc.reroute_count() == 2);
  alloc.apply(Vec3(0.0, 0.0, 0.0));
  CHECK(alloc.reroute_count() == 2);  // no overflow, no increment
}

TEST_CASE("closed loop on a straight flat segment converges under 0.1 mm") {
  const TerrainField field = TerrainField::build(TerrainSpec{});
  std::vector<Pose> wps(2);
  wps[0].position = Vec3(0.0, 0.0, 0.1);
  wps[1].position = Vec3(3.0, 0.0, 0.1);
  const TimedPlan plan = build_plan(wps, field, PlannerConfig{});

  PlantConfig pc;
  Plant plant(&field, pc, 1);
  plant.init_at(-0.6, 0.0, 0.0);

  Executor exec(ExecutorConfig{});
  const PreviewQueue no_previews(5);
  const MpcParams params;

  Vec5 u_prev = Vec5::Zero();
  Vec5 cmd = Vec5::Zero();
  double worst_late = 0.0;
  const long steps = 5000;  // 5 s at 1 ms
  for (long k = 0; k < steps; ++k) {
    const double t = k * pc.dt;
    if (k % 100 == 0) {
      const GroundTruth& gt = plant.truth();
      const MpcProblem problem = build_problem(gt.state, gt.ee_world, plan, t,
                                               no_previews, u_prev, params);
      const MpcSolution sol = solve(problem);
      const Vec5 u0 = sol.u_seq[0];
      const Vec3 arm_target = gt.state.arm_offset + params.dt * u0.tail<3>();
      exec.set_command(t, u0[0], u0[1], arm_target);
      u_prev = u0;

      if (t >= 2.0) {
        const DisturbanceVec e = pose_error(plan.reference(t), gt.ee_world);
        worst_late = std::max(worst_late, e.dp.norm());
      }
    }
    if (k % 10 == 0) cmd = exec.tick(t, plant.truth().state.arm_offset);
    plant.step(cmd);
  }
  CHECK(worst_late < 1e-4);
}
