#ifndef TERRAPRINT_HARNESS_HPP
#define TERRAPRINT_HARNESS_HPP

#include <string>
#include <utility>
#include <vector>

#include "terraprint/predictor.hpp"
#include "terraprint/report.hpp"
#include "terraprint/scenario.hpp"

namespace terraprint {

// Predictor per config: "zero" (reactive baseline), "train-first" (generate
// traverses and train before the run), or a path to a saved net whose input
// width must match the configured feature layout.
PredictorNet resolve_predictor(const ScenarioConfig& cfg);

// Full closed loop: 0.1 Hz plan refresh, 1 kHz plant and sensor sampling,
// 100 Hz executor, 10 Hz preview controller. Writes report.json, perf.json,
// and the three CSV logs into out_dir. Deterministic per config + seeds
// (wall-clock figures live only in perf.json). With realtime set, the loop is
// paced so simulated time tracks wall time.
RunReport run_scenario(const ScenarioConfig& cfg, const PredictorNet& net,
                       const std::string& out_dir, bool realtime = false);
RunReport run_scenario(const ScenarioConfig& cfg);  // resolves net, cfg.out_dir

struct AblationResult {
  RunReport predictive;
  RunReport reactive;
  double margin_mm{0.0};  // reactive mean error norm minus predictive
};

// Paired comparison: identical config + seeds, predictor swapped for the zero
// net. Writes <out>/predictive, <out>/reactive, and ablation.json; verifies
// the two runs saw the same noise realization via the plant checksum.
AblationResult run_ablation(const ScenarioConfig& cfg);

struct BatteryEntry {
  std::string name;
  RunReport report;
};

// Runs the five terrain-class presets with the class noise amplitudes,
// reusing one predictor (trained on the mixed class when the config says
// train-first). Writes <out>/<class>/ per run plus battery.json with the
// mean-height-deviation ordering.
std::vector<BatteryEntry> run_terrain_battery(const ScenarioConfig& base);

// Drives gen.traverses random reactive traverses over the configured terrain
// and collects 50 Hz feature rows with disturbance-increment targets
// accumulated 0.5 s ahead, split 80/20 at the trajectory level.
TrajectoryDataset gen_data(const ScenarioConfig& cfg);

// Dataset (loaded from train.dataset_dir or generated), optional STLSQ
// feature selection, then training. Deterministic in seeds.training.
TrainResult train_from_config(const ScenarioConfig& cfg);

}  // namespace terraprint

#endif
