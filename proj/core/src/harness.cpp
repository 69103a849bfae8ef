#include "terraprint/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "terraprint/mpc.hpp"
#include "terraprint/plant.hpp"
#include "terraprint/sensors.hpp"

namespace terraprint {
namespace {

using json = nlohmann::json;

constexpr long kPlanEvery = 10000;  // plant steps per plan refresh (0.1 Hz)
constexpr long kExecEvery = 10;     // plant steps per executor tick (100 Hz)
constexpr long kMpcEvery = 100;     // plant steps per controller tick (10 Hz)
constexpr long kLogEvery = 10;      // plant steps per log row (100 Hz)
constexpr long kFeatureEvery = 20;  // plant steps per dataset row (50 Hz)
constexpr long kTargetLead = 500;   // dataset target window start, plant steps
constexpr long kTargetSpan = 100;   // dataset target window length

std::vector<Pose> make_waypoints(const ScenarioConfig& cfg,
                                 const TerrainField& field) {
  std::vector<Pose> wps;
  wps.reserve(cfg.waypoints_xy.size());
  for (const auto& xy : cfg.waypoints_xy) {
    Pose p;
    p.position = Vec3(xy.x(), xy.y(), field.height(xy.x(), xy.y()) + cfg.standoff);
    wps.push_back(p);
  }
  return wps;
}

PlannerConfig planner_config(const ScenarioConfig& cfg) {
  PlannerConfig pcfg;
  pcfg.v_max = cfg.path_v_max;
  return pcfg;
}

PlantConfig plant_config(const ScenarioConfig& cfg) {
  PlantConfig pc;
  pc.noise_amplitude = cfg.noise_amplitude;
  pc.noise_hold = cfg.noise_hold;
  pc.step_offset = cfg.step_offset;
  pc.step_time = cfg.step_time;
  pc.v_bound = cfg.mpc.v_bound;
  pc.omega_bound = cfg.mpc.omega_bound;
  pc.arm_vel_bound = cfg.mpc.arm_vel_bound;
  return pc;
}

// Start with the tool point on the first waypoint, chassis facing the second.
void place_robot(Plant& plant, const std::vector<Pose>& wps, const Vec3& tool) {
  const Eigen::Vector2d dir =
      (wps[1].position - wps[0].position).head<2>();
  const double yaw = std::atan2(dir.y(), dir.x());
  const double bx = wps[0].position.x() - tool.x() * std::cos(yaw);
  const double by = wps[0].position.y() - tool.x() * std::sin(yaw);
  plant.init_at(bx, by, yaw);
}

// v/omega carry the lag-filtered actual-rate estimates the controller keeps
// in lockstep with the executor's zero-order-held commands.
RobotState estimate_state(const SensorFrame& frame, const Vec3& tool,
                          double v_act, double omega_act, const Vec5& u_prev) {
  RobotState x0;
  x0.base.orientation = from_rpy(frame.base_orientation_est.x(),
                                 frame.base_orientation_est.y(),
                                 frame.base_orientation_est.z());
  x0.arm_offset = frame.joint_pos_meas;
  x0.base.position = frame.ee_pose_meas.position -
                     x0.base.orientation * (tool + x0.arm_offset);
  x0.v = v_act;
  x0.omega = omega_act;
  x0.arm_vel = u_prev.tail<3>();
  x0.time = frame.t;
  return x0;
}

struct LoopResult {
  RunLogs logs;
  RunCounters counters;
};

// One sequential simulation context; shares nothing mutable with other runs.
LoopResult simulate(const ScenarioConfig& cfg, const PredictorNet& net,
                    bool realtime,
                    Trajectory* dataset_rows = nullptr,
                    const TerrainField* shared_field = nullptr,
                    std::uint64_t noise_seed_override = 0,
                    std::uint64_t sensor_seed_override = 0) {
  const TerrainField owned_field =
      shared_field ? TerrainField() : TerrainField::build(cfg.terrain);
  const TerrainField& field = shared_field ? *shared_field : owned_field;

  const std::vector<Pose> wps = make_waypoints(cfg, field);
  const PlannerConfig pcfg = planner_config(cfg);
  const PlantConfig pc = plant_config(cfg);

  Plant plant(&field, pc,
              noise_seed_override ? noise_seed_override : cfg.seed_noise);
  place_robot(plant, wps, pc.tool_nominal);
  SensorSuite sensors(cfg.sensors,
                      sensor_seed_override ? sensor_seed_override : cfg.seed_sensors);
  Executor exec(ExecutorConfig{.mpc_period = cfg.mpc.dt,
                               .arm_vel_bound = cfg.mpc.arm_vel_bound});
  CommandDecomposer decomposer(cfg.split_hz, cfg.mpc.dt);
  ArmAllocator allocator(pc.arm_min, pc.arm_max);
  InnovationGate gate;
  PreviewQueue previews(std::max(
      0, int(std::llround(cfg.mpc.preview_valid / cfg.mpc.dt))));
  DisturbanceVec e_pred = DisturbanceVec::zero();

  LoopResult out;
  out.logs.errors.header = {"t", "ex", "ey", "ez", "rx", "ry", "rz"};
  out.logs.mpc.header = {"t",       "ex",     "ey",      "ez",      "rx",
                         "ry",      "rz",     "dhat_x",  "dhat_y",  "dhat_z",
                         "dhat_rx", "dhat_ry", "dhat_rz", "v",       "omega",
                         "arm_vx",  "arm_vy", "arm_vz",  "cost",    "active",
                         "iterations", "fallback"};
  out.logs.groundtruth.header = {"t",      "ref_x",  "ref_y", "ref_z", "ee_x",
                                 "ee_y",   "ee_z",   "base_x", "base_y",
                                 "base_z", "yaw",    "arm_x",  "arm_y", "arm_z"};

  const long steps = std::llround(cfg.duration / pc.dt);
  TimedPlan plan;
  Vec5 u_prev = Vec5::Zero();
  Vec5 cmd = Vec5::Zero();
  double v_act_est = 0.0, omega_act_est = 0.0;
  std::vector<double> solve_ms;
  long fallbacks = 0;

  std::vector<DisturbanceVec> injected;
  std::vector<double> yaw_at_row;
  std::vector<Eigen::VectorXd> feature_rows;
  if (dataset_rows) injected.reserve(size_t(steps));

  const auto wall_start = std::chrono::steady_clock::now();

  for (long k = 0; k < steps; ++k) {
    const double t = double(k) * pc.dt;
    if (k % kPlanEvery == 0) plan = build_plan(wps, field, pcfg);

    const GroundTruth& gt = plant.truth();
    const SensorFrame& frame = sensors.sample(gt, field, t);

    if (k % kLogEvery == 0) {
      const Pose ref = plan.reference(t);
      const DisturbanceVec e = pose_error(ref, gt.ee_world);
      out.logs.errors.rows.push_back({t, e.dp.x(), e.dp.y(), e.dp.z(),
                                      e.dr.x(), e.dr.y(), e.dr.z()});
      out.logs.groundtruth.rows.push_back(
          {t, ref.position.x(), ref.position.y(), ref.position.z(),
           gt.ee_world.position.x(), gt.ee_world.position.y(),
           gt.ee_world.position.z(), gt.state.base.position.x(),
           gt.state.base.position.y(), gt.state.base.position.z(),
           to_rpy(gt.state.base.orientation).z(), gt.state.arm_offset.x(),
           gt.state.arm_offset.y(), gt.state.arm_offset.z()});
    }

    if (dataset_rows && k % kFeatureEvery == 0 &&
        k + kTargetLead + kTargetSpan <= steps) {
      const RobotState est = estimate_state(frame, pc.tool_nominal, v_act_est,
                                            omega_act_est, u_prev);
      feature_rows.push_back(extract_features(frame, est, cfg.layout));
      yaw_at_row.push_back(to_rpy(gt.state.base.orientation).z());
    }

    if (k % kMpcEvery == 0) {
      const RobotState x0 = estimate_state(frame, pc.tool_nominal, v_act_est,
                                           omega_act_est, u_prev);
      const Eigen::VectorXd features = extract_features(frame, x0, cfg.layout);
      DisturbanceVec dhat = net.forward(features);
      // Rail against runaway extrapolation: no single-period estimate may
      // exceed the clamp, whatever the net thinks it saw.
      dhat.dp = dhat.dp.cwiseMax(-cfg.mpc.preview_clamp)
                    .cwiseMin(cfg.mpc.preview_clamp);
      dhat.dr = dhat.dr.cwiseMax(-cfg.mpc.preview_clamp)
                    .cwiseMin(cfg.mpc.preview_clamp);
      previews.push(dhat);

      // Gate the measured error against the last solution's one-step
      // forecast: single-period deviations (a fresh wheel-contact draw, a
      // vision outlier) are withheld from the optimizer, persistent offsets
      // pass through on their second period. Errors here are target-minus-
      // actual; the admitted error is folded back into the pose handed to the
      // optimizer.
      const Pose ref_now = plan.reference(t);
      const DisturbanceVec e_meas = pose_error(ref_now, frame.ee_pose_meas);
      const DisturbanceVec e_fed = gate.step(e_meas, e_pred);
      Pose ee_fed;
      ee_fed.position = ref_now.position - e_fed.dp;
      ee_fed.orientation = rotation_exp(-e_fed.dr) * ref_now.orientation;

      const MpcProblem problem =
          build_problem(x0, ee_fed, plan, t, previews, u_prev, cfg.mpc);
      const MpcSolution sol = solve(problem);
      solve_ms.push_back(sol.solve_time * 1e3);
      fallbacks += sol.fallback ? 1 : 0;
      const Vec5 u0 = sol.u_seq.front();
      // The solver predicts actual-minus-target; the gate compares
      // target-minus-actual.
      e_pred = -1.0 * sol.predicted_errors.front();

      // Frequency split of the admitted error: the chassis channel is already
      // the QP's job; the arm can take an extra share of the high-frequency
      // content when configured.
      const CommandDecomposer::Shares shares = decomposer.step(e_fed);
      Vec3 arm_target =
          x0.arm_offset + cfg.mpc.dt * u0.tail<3>() +
          cfg.arm_hifreq_gain * (x0.base.orientation.conjugate() * shares.arm.dp);
      arm_target = allocator.apply(arm_target);
      // The clipped remainder stays in the measured error, so the chassis
      // loop absorbs it on later ticks; the allocator keeps the count.
      allocator.consume_carry();
      exec.set_command(t, u0[0], u0[1], arm_target);
      u_prev = u0;
      v_act_est = cfg.mpc.beta_v() * v_act_est + (1.0 - cfg.mpc.beta_v()) * u0[0];
      omega_act_est = cfg.mpc.beta_omega() * omega_act_est +
                      (1.0 - cfg.mpc.beta_omega()) * u0[1];

      out.logs.mpc.rows.push_back(
          {t, e_meas.dp.x(), e_meas.dp.y(), e_meas.dp.z(), e_meas.dr.x(),
           e_meas.dr.y(), e_meas.dr.z(), dhat.dp.x(), dhat.dp.y(), dhat.dp.z(),
           dhat.dr.x(), dhat.dr.y(), dhat.dr.z(), u0[0], u0[1], u0[2], u0[3],
           u0[4], sol.cost, double(sol.active_constraints),
           double(sol.iterations), sol.fallback ? 1.0 : 0.0});

      if (realtime) {
        const auto target = wall_start + std::chrono::duration_cast<
                                             std::chrono::steady_clock::duration>(
                                             std::chrono::duration<double>(t));
        std::this_thread::sleep_until(target);
      }
    }

    if (k % kExecEvery == 0) cmd = exec.tick(t, frame.joint_pos_meas);
    const GroundTruth& after = plant.step(cmd);
    if (dataset_rows) injected.push_back(after.injected);
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start)
          .count();

  if (dataset_rows) {
    const long n = long(feature_rows.size());
    dataset_rows->features.resize(n, n ? feature_rows[0].size() : cfg.layout.dim());
    dataset_rows->targets.resize(n, 6);
    for (long r = 0; r < n; ++r) {
      dataset_rows->features.row(r) = feature_rows[size_t(r)].transpose();
      DisturbanceVec sum;
      const long base = r * kFeatureEvery + kTargetLead;
      for (long k = base; k < base + kTargetSpan; ++k)
        sum = sum + injected[size_t(k)];
      const Quat unyaw = yaw_rotation(-yaw_at_row[size_t(r)]);
      dataset_rows->targets.row(r).head<3>() = (unyaw * sum.dp).transpose();
      dataset_rows->targets.row(r).tail<3>() = (unyaw * sum.dr).transpose();
    }
  }

  out.counters.saturations = plant.saturation_count();
  out.counters.watchdog_trips = exec.watchdog_trips();
  out.counters.reroutes = allocator.reroute_count();
  out.counters.fallbacks = fallbacks;
  out.counters.noise_checksum = plant.noise_checksum();
  out.counters.wall_s = wall;
  if (!solve_ms.empty()) {
    double sum = 0.0, mx = 0.0;
    for (double v : solve_ms) {
      sum += v;
      mx = std::max(mx, v);
    }
    out.counters.solve_mean_ms = sum / double(solve_ms.size());
    out.counters.solve_max_ms = mx;
    std::vector<double> sorted(solve_ms);
    std::sort(sorted.begin(), sorted.end());
    const size_t rank = size_t(std::ceil(0.95 * double(sorted.size())));
    out.counters.solve_p95_ms =
        sorted[std::min(sorted.size() - 1, std::max<size_t>(rank, 1) - 1)];
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace

PredictorNet resolve_predictor(const ScenarioConfig& cfg) {
  if (cfg.predictor_source == "zero")
    return PredictorNet::zero(cfg.layout.dim(), cfg.layout.names());
  if (cfg.predictor_source == "train-first") return train_from_config(cfg).net;
  PredictorNet net = PredictorNet::load(cfg.predictor_source);
  if (net.input_dim() != cfg.layout.dim())
    throw std::runtime_error(
        "config: key 'predictor.source': net at '" + cfg.predictor_source +
        "' expects " + std::to_string(net.input_dim()) +
        " features, layout provides " + std::to_string(cfg.layout.dim()));
  return net;
}

RunReport run_scenario(const ScenarioConfig& cfg, const PredictorNet& net,
                       const std::string& out_dir, bool realtime) {
  LoopResult res = simulate(cfg, net, realtime);
  RunReport report = compute_report(cfg, std::move(res.logs), res.counters);
  emit_report(report, out_dir);
  return report;
}

RunReport run_scenario(const ScenarioConfig& cfg) {
  return run_scenario(cfg, resolve_predictor(cfg), cfg.out_dir);
}

AblationResult run_ablation(const ScenarioConfig& cfg) {
  if (cfg.predictor_source == "zero")
    throw std::runtime_error(
        "config: key 'predictor.source': ablation needs a trained predictor "
        "to compare against the reactive baseline");
  const PredictorNet trained = resolve_predictor(cfg);
  const PredictorNet zero = PredictorNet::zero(cfg.layout.dim(), cfg.layout.names());

  AblationResult res;
  res.predictive = run_scenario(cfg, trained, cfg.out_dir + "/predictive");
  res.reactive = run_scenario(cfg, zero, cfg.out_dir + "/reactive");
  if (res.predictive.counters.noise_checksum != res.reactive.counters.noise_checksum)
    throw std::logic_error("ablation runs diverged: unequal noise checksums");
  res.margin_mm = res.reactive.mean_enorm_mm - res.predictive.mean_enorm_mm;

  json j;
  j["predictive_mean_enorm_mm"] = res.predictive.mean_enorm_mm;
  j["reactive_mean_enorm_mm"] = res.reactive.mean_enorm_mm;
  j["margin_mm"] = res.margin_mm;
  j["paired_noise_checksums_equal"] = true;
  write_text(cfg.out_dir + "/ablation.json", j.dump(2) + "\n");
  return res;
}

std::vector<BatteryEntry> run_terrain_battery(const ScenarioConfig& base) {
  const std::vector<TerrainClassPreset> presets =
      terrain_class_presets(base.seed_terrain);

  // One predictor serves every class; when training is requested it sees the
  // mixed class, the broadest disturbance distribution in the battery.
  PredictorNet net;
  if (base.predictor_source == "train-first") {
    ScenarioConfig train_cfg = base;
    for (const auto& preset : presets)
      if (preset.name == "mixed") {
        train_cfg.terrain = preset.spec;
        train_cfg.noise_amplitude = preset.wheel_noise_amplitude;
      }
    net = train_from_config(train_cfg).net;
  } else {
    net = resolve_predictor(base);
  }

  std::vector<BatteryEntry> entries;
  json j;
  for (const auto& preset : presets) {
    ScenarioConfig cfg = base;
    cfg.terrain = preset.spec;
    cfg.noise_amplitude = preset.wheel_noise_amplitude;
    RunReport report =
        run_scenario(cfg, net, base.out_dir + "/" + preset.name);
    j["classes"][preset.name] = {
        {"mean_height_dev_mm", report.mean_height_dev_mm},
        {"noise_amplitude_mm", preset.wheel_noise_amplitude * 1e3},
        {"watchdog_trips", report.counters.watchdog_trips}};
    entries.push_back(BatteryEntry{preset.name, std::move(report)});
  }

  std::vector<std::string> order;
  for (const auto& e : entries) order.push_back(e.name);
  std::stable_sort(order.begin(), order.end(),
                   [&](const std::string& a, const std::string& b) {
                     auto metric = [&](const std::string& name) {
                       for (const auto& e : entries)
                         if (e.name == name) return e.report.mean_height_dev_mm;
                       return 0.0;
                     };
                     return metric(a) < metric(b);
                   });
  j["order_by_mean_height_dev"] = order;
  write_text(base.out_dir + "/battery.json", j.dump(2) + "\n");
  return entries;
}

TrajectoryDataset gen_data(const ScenarioConfig& cfg) {
  const TerrainField field = TerrainField::build(cfg.terrain);
  const PredictorNet zero =
      PredictorNet::zero(cfg.layout.dim(), cfg.layout.names());
  RngStream starts(RngStream::derive(cfg.seed_training, 0x6e5a93));

  TrajectoryDataset data;
  data.layout = cfg.layout.names();
  for (int i = 0; i < cfg.gen_traverses; ++i) {
    ScenarioConfig tcfg = cfg;
    tcfg.duration = cfg.gen_duration;
    tcfg.path_v_max = cfg.gen_speed;
    tcfg.step_offset = 0.0;
    tcfg.step_time = -1.0;
    const double x0 = starts.uniform(-2.0, 1.0);
    const double y0 = starts.uniform(-1.0, 1.0);
    // End the path partway through the window so every traverse also covers
    // deceleration and a parked hold — regimes the deployed controller spends
    // real time in and the net must not extrapolate into blind.
    const double frac = starts.uniform(0.5, 0.9);
    const double length = cfg.gen_speed * cfg.gen_duration * frac;
    tcfg.waypoints_xy = {Eigen::Vector2d(x0, y0),
                         Eigen::Vector2d(x0 + length, y0)};

    Trajectory traj;
    simulate(tcfg, zero, false, &traj, &field,
             RngStream::derive(cfg.seed_noise, 1000 + std::uint64_t(i)),
             RngStream::derive(cfg.seed_sensors, 2000 + std::uint64_t(i)));
    data.trajectories.push_back(std::move(traj));
  }
  data.split_80_20(RngStream::derive(cfg.seed_training, 0x5971c3));
  return data;
}

TrainResult train_from_config(const ScenarioConfig& cfg) {
  const TrajectoryDataset data = cfg.train_dataset_dir.empty()
                                     ? gen_data(cfg)
                                     : TrajectoryDataset::load(cfg.train_dataset_dir);
  Eigen::VectorXd mask;
  if (cfg.select_enabled)
    mask = select_features(data, cfg.select_threshold, cfg.select_ridge);
  return train_predictor(data, cfg.train, mask);
}

}  // namespace terraprint
