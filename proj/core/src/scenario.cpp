#include "terraprint/scenario.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace terraprint {
namespace {

[[noreturn]] void fail(const std::string& key, const std::string& msg) {
  throw std::runtime_error("config: key '" + key + "': " + msg);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) fail(key, "trailing characters in number '" + v + "'");
    if (!std::isfinite(x)) fail(key, "value must be finite");
    return x;
  } catch (const std::invalid_argument&) {
    fail(key, "expected a number, got '" + v + "'");
  } catch (const std::out_of_range&) {
    fail(key, "number out of range: '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  unsigned long long x = 0;
  size_t used = 0;
  try {
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    fail(key, "expected an unsigned integer, got '" + v + "'");
  }
  if (used != v.size()) fail(key, "trailing characters in integer '" + v + "'");
  return x;
}

int parse_int(const std::string& key, const std::string& v) {
  long x = 0;
  size_t used = 0;
  try {
    x = std::stol(v, &used);
  } catch (const std::exception&) {
    fail(key, "expected an integer, got '" + v + "'");
  }
  if (used != v.size()) fail(key, "trailing characters in integer '" + v + "'");
  return int(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(key, "expected a boolean (true/false), got '" + v + "'");
}

std::vector<Eigen::Vector2d> parse_waypoints(const std::string& key,
                                             const std::string& v) {
  std::vector<Eigen::Vector2d> out;
  std::stringstream points(v);
  std::string point;
  while (std::getline(points, point, ';')) {
    point = trim(point);
    if (point.empty()) continue;
    const auto comma = point.find(',');
    if (comma == std::string::npos)
      fail(key, "waypoint '" + point + "' needs the form x,y");
    const double x = parse_double(key, trim(point.substr(0, comma)));
    const double y = parse_double(key, trim(point.substr(comma + 1)));
    out.emplace_back(x, y);
  }
  if (out.size() < 2) fail(key, "need at least two waypoints");
  return out;
}

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

void ScenarioConfig::validate() const {
  if (duration <= 0.0) fail("sim.duration_s", "must be > 0");
  if (waypoints_xy.size() < 2) fail("path.waypoints_xy", "need at least two waypoints");
  if (standoff <= 0.0) fail("path.standoff_m", "must be > 0");
  if (path_v_max <= 0.0) fail("path.v_max", "must be > 0");
  if (noise_amplitude < 0.0) fail("noise.amplitude_mm", "must be >= 0");
  if (noise_hold <= 0.0) fail("noise.hold_s", "must be > 0");
  if (split_hz <= 0.0) fail("mpc.split_hz", "must be > 0");
  if (arm_hifreq_gain < 0.0) fail("mpc.arm_hifreq_gain", "must be >= 0");
  if (step_time >= 0.0 && step_time >= duration)
    fail("event.time_s", "event fires after the run ends");
  if (predictor_source.empty()) fail("predictor.source", "must not be empty");
  if (gen_traverses < 2) fail("gen.traverses", "need at least two traverses for a split");
  if (gen_duration <= 1.0) fail("gen.duration_s", "must be > 1 s");
  if (gen_speed <= 0.0) fail("gen.speed", "must be > 0");
  if (train.epochs < 0) fail("train.epochs", "must be >= 0");
  if (train.batch <= 0) fail("train.batch", "must be > 0");
  if (train.hidden1 <= 0 || train.hidden2 <= 0)
    fail("train.hidden1", "hidden sizes must be > 0");
  if (select_threshold < 0.0) fail("select.threshold", "must be >= 0");
  if (select_ridge < 0.0) fail("select.ridge", "must be >= 0");
  try {
    mpc.validate();
  } catch (const std::exception& e) {
    fail("mpc.*", e.what());
  }
}

ScenarioConfig parse_scenario_text(const std::string& text) {
  ScenarioConfig cfg;
  cfg.raw_text = text;

  std::map<std::string, std::string> kv;
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) +
                               ": expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config: line " + std::to_string(lineno) +
                               ": empty key");
    kv[key] = val;  // later duplicates override
  }

  std::set<std::string> seen_seeds;
  for (const auto& [key, val] : kv) {
    if (key == "terrain.kind") {
      try {
        cfg.terrain.kind = terrain_kind_from_string(val);
      } catch (const std::exception& e) {
        fail(key, e.what());
      }
    } else if (key == "terrain.slope_angle_deg") {
      cfg.terrain.slope_angle = parse_double(key, val) * kDegToRad;
    } else if (key == "terrain.slope_start_m") {
      cfg.terrain.slope_start = parse_double(key, val);
    } else if (key == "terrain.roughness_amplitude_mm") {
      cfg.terrain.roughness_amplitude = parse_double(key, val) * 1e-3;
    } else if (key == "terrain.roughness_cutoff_cpm") {
      cfg.terrain.roughness_cutoff = parse_double(key, val);
    } else if (key == "path.waypoints_xy") {
      cfg.waypoints_xy = parse_waypoints(key, val);
    } else if (key == "path.standoff_m") {
      cfg.standoff = parse_double(key, val);
    } else if (key == "path.v_max") {
      cfg.path_v_max = parse_double(key, val);
    } else if (key == "mpc.horizon") {
      cfg.mpc.horizon = parse_int(key, val);
    } else if (key == "mpc.control_horizon") {
      cfg.mpc.control_horizon = parse_int(key, val);
    } else if (key == "mpc.preview_valid_s") {
      cfg.mpc.preview_valid = parse_double(key, val);
    } else if (key == "mpc.preview_clamp") {
      cfg.mpc.preview_clamp = parse_double(key, val);
    } else if (key == "mpc.split_hz") {
      cfg.split_hz = parse_double(key, val);
    } else if (key == "mpc.arm_hifreq_gain") {
      cfg.arm_hifreq_gain = parse_double(key, val);
    } else if (key == "noise.amplitude_mm") {
      cfg.noise_amplitude = parse_double(key, val) * 1e-3;
    } else if (key == "noise.hold_s") {
      cfg.noise_hold = parse_double(key, val);
    } else if (key == "event.step_mm") {
      cfg.step_offset = parse_double(key, val) * 1e-3;
    } else if (key == "event.time_s") {
      cfg.step_time = parse_double(key, val);
    } else if (key == "sensors.sigma_imu_acc") {
      cfg.sensors.sigma_imu_acc = parse_double(key, val);
    } else if (key == "sensors.sigma_imu_gyro") {
      cfg.sensors.sigma_imu_gyro = parse_double(key, val);
    } else if (key == "sensors.sigma_vision_pos_m") {
      cfg.sensors.sigma_vision_pos = parse_double(key, val);
    } else if (key == "sensors.sigma_vision_rot_rad") {
      cfg.sensors.sigma_vision_rot = parse_double(key, val);
    } else if (key == "sensors.sigma_depth_m") {
      cfg.sensors.sigma_depth = parse_double(key, val);
    } else if (key == "sensors.sigma_orientation_rad") {
      cfg.sensors.sigma_orientation = parse_double(key, val);
    } else if (key == "sim.duration_s") {
      cfg.duration = parse_double(key, val);
    } else if (key == "predictor.source") {
      cfg.predictor_source = val;
    } else if (key == "net.velocity_terms") {
      cfg.layout.velocity_terms = parse_bool(key, val);
    } else if (key == "seeds.terrain") {
      cfg.seed_terrain = parse_u64(key, val);
      seen_seeds.insert("terrain");
    } else if (key == "seeds.noise") {
      cfg.seed_noise = parse_u64(key, val);
      seen_seeds.insert("noise");
    } else if (key == "seeds.sensors") {
      cfg.seed_sensors = parse_u64(key, val);
      seen_seeds.insert("sensors");
    } else if (key == "seeds.training") {
      cfg.seed_training = parse_u64(key, val);
      seen_seeds.insert("training");
    } else if (key == "out.dir") {
      cfg.out_dir = val;
    } else if (key == "check.max_err_mm") {
      cfg.check_max_err_mm = parse_double(key, val);
    } else if (key == "check.drift_mm_per_s") {
      cfg.check_drift_mm_s = parse_double(key, val);
    } else if (key == "check.settle_s") {
      cfg.check_settle_s = parse_double(key, val);
    } else if (key == "check.solve_max_ms") {
      cfg.check_solve_max_ms = parse_double(key, val);
    } else if (key == "gen.traverses") {
      cfg.gen_traverses = parse_int(key, val);
    } else if (key == "gen.duration_s") {
      cfg.gen_duration = parse_double(key, val);
    } else if (key == "gen.speed") {
      cfg.gen_speed = parse_double(key, val);
    } else if (key == "train.lr") {
      cfg.train.lr = parse_double(key, val);
    } else if (key == "train.momentum") {
      cfg.train.momentum = parse_double(key, val);
    } else if (key == "train.epochs") {
      cfg.train.epochs = parse_int(key, val);
    } else if (key == "train.batch") {
      cfg.train.batch = parse_int(key, val);
    } else if (key == "train.hidden1") {
      cfg.train.hidden1 = parse_int(key, val);
    } else if (key == "train.hidden2") {
      cfg.train.hidden2 = parse_int(key, val);
    } else if (key == "train.grad_clip") {
      cfg.train.grad_clip = parse_double(key, val);
    } else if (key == "train.axis_gate") {
      cfg.train.axis_gate = parse_double(key, val);
    } else if (key == "train.weight_decay") {
      cfg.train.weight_decay = parse_double(key, val);
    } else if (key == "train.activation") {
      if (val == "relu") {
        cfg.train.activation = Activation::relu;
      } else if (val == "tanh") {
        cfg.train.activation = Activation::tanh_fn;
      } else {
        fail(key, "expected relu or tanh, got '" + val + "'");
      }
    } else if (key == "train.dataset_dir") {
      cfg.train_dataset_dir = val;
    } else if (key == "select.enabled") {
      cfg.select_enabled = parse_bool(key, val);
    } else if (key == "select.threshold") {
      cfg.select_threshold = parse_double(key, val);
    } else if (key == "select.ridge") {
      cfg.select_ridge = parse_double(key, val);
    } else {
      fail(key, "unknown key");
    }
  }

  for (const char* name : {"terrain", "noise", "sensors", "training"})
    if (!seen_seeds.count(name))
      fail(std::string("seeds.") + name,
           "missing; every random stream seed must be explicit");

  cfg.terrain.seed = cfg.seed_terrain;
  cfg.train.seed = cfg.seed_training;
  cfg.validate();
  return cfg;
}

ScenarioConfig parse_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

void apply_seed_override(ScenarioConfig& cfg, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error("seed override '" + spec + "' needs the form name=value");
  const std::string name = trim(spec.substr(0, eq));
  const std::uint64_t value = parse_u64("seed override " + name, trim(spec.substr(eq + 1)));
  if (name == "terrain") {
    cfg.seed_terrain = value;
    cfg.terrain.seed = value;
  } else if (name == "noise") {
    cfg.seed_noise = value;
  } else if (name == "sensors") {
    cfg.seed_sensors = value;
  } else if (name == "training") {
    cfg.seed_training = value;
    cfg.train.seed = value;
  } else {
    throw std::runtime_error("seed override: unknown stream '" + name +
                             "' (use terrain|noise|sensors|training)");
  }
}

}  // namespace terraprint
