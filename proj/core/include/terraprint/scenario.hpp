#ifndef TERRAPRINT_SCENARIO_HPP
#define TERRAPRINT_SCENARIO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "terraprint/mpc.hpp"
#include "terraprint/predictor.hpp"
#include "terraprint/sensors.hpp"
#include "terraprint/terrain.hpp"

namespace terraprint {

// Everything a run needs, parsed from a flat key = value file (sections by
// key prefix, '#' comments). Every random stream seed must be given
// explicitly; there are no entropy defaults. The exact key list lives in the
// README next to the sample configs.
struct ScenarioConfig {
  // terrain.*  (field seed comes from seeds.terrain)
  TerrainSpec terrain;

  // path.*
  std::vector<Eigen::Vector2d> waypoints_xy{Eigen::Vector2d(0.0, 0.0),
                                            Eigen::Vector2d(10.0, 0.0)};
  double standoff{0.1};    // print height above terrain, m
  double path_v_max{0.5};  // planner speed cap, m/s

  // mpc.*
  MpcParams mpc;
  double split_hz{1.0};          // chassis/arm frequency split
  double arm_hifreq_gain{0.0};   // extra share of high-frequency error sent to the arm
                                 // on top of the optimizer's own allocation

  // noise.*
  double noise_amplitude{0.0};  // wheel-contact perturbation bound, m
  double noise_hold{0.1};       // s

  // event.*  (one-shot vertical chassis offset for settling measurements)
  double step_offset{0.0};  // m
  double step_time{-1.0};   // s; negative disables the event

  // sensors.*
  SensorConfig sensors;

  // sim.*
  double duration{30.0};  // s

  // predictor.*  ("zero", "train-first", or a path to a saved net)
  std::string predictor_source{"zero"};

  // net.*
  FeatureLayout layout;

  // seeds.*  (required; parse fails without all four)
  std::uint64_t seed_terrain{0};
  std::uint64_t seed_noise{0};
  std::uint64_t seed_sensors{0};
  std::uint64_t seed_training{0};

  // out.*
  std::string out_dir{"out"};

  // check.*  (gates applied only when the CLI gets --check)
  double check_max_err_mm{5.0};
  double check_drift_mm_s{0.05};
  double check_settle_s{0.6};
  double check_solve_max_ms{100.0};

  // gen.*  (data-generation traverses)
  int gen_traverses{10};
  double gen_duration{20.0};  // s per traverse
  double gen_speed{0.5};      // m/s

  // train.*
  TrainHyper train;
  std::string train_dataset_dir;  // when set, `train` reads instead of generating

  // select.*  (optional STLSQ feature selection before training)
  bool select_enabled{false};
  double select_threshold{0.1};
  double select_ridge{1e-6};

  std::string raw_text;  // the config file byte for byte, echoed into reports

  // Throws std::runtime_error naming the offending field.
  void validate() const;
};

// Parse + validate. Unknown keys and malformed values fail with the key name
// in the message; later duplicates of a key override earlier ones.
ScenarioConfig parse_scenario_text(const std::string& text);
ScenarioConfig parse_scenario_file(const std::string& path);

// Apply a "name=value" seed override (name in terrain|noise|sensors|training).
void apply_seed_override(ScenarioConfig& cfg, const std::string& spec);

}  // namespace terraprint

#endif
