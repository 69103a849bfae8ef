// terraprint: scenario runner for the terrain-adaptive mobile printing stack.
//
// Subcommands: run, ablation, battery, train, gen-data. Exit codes: 0 on
// success, 2 on configuration errors, 3 when --check finds a threshold
// violation, 1 on any other failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "terraprint/harness.hpp"

namespace {

using namespace terraprint;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> seed_overrides;
  bool realtime = false;
  bool check = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("config", opts.config_path, "scenario config file")->required();
  cmd->add_option("--out", opts.out_dir, "override out.dir from the config");
  cmd->add_option("--seed-override", opts.seed_overrides,
                  "name=value with name in terrain|noise|sensors|training");
  cmd->add_flag("--realtime", opts.realtime,
                "pace the loop so simulated time tracks wall time");
  cmd->add_flag("--check", opts.check,
                "exit 3 when a check.* threshold is violated");
}

ScenarioConfig load_config(const CommonOpts& opts) {
  ScenarioConfig cfg = parse_scenario_file(opts.config_path);
  for (const std::string& spec : opts.seed_overrides)
    apply_seed_override(cfg, spec);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  return cfg;
}

void print_summary(const std::string& name, const RunReport& r) {
  std::printf("%-12s max |e| mm (x,y,z): %.3f %.3f %.3f   mean ||e||: %.3f mm\n",
              name.c_str(), r.axis[0].max, r.axis[1].max, r.axis[2].max,
              r.mean_enorm_mm);
  std::printf("%-12s drift %.4f mm/s (tail %.4f)   layer sigma %.3f mm\n", "",
              r.drift_slope_mm_s, r.tail_drift_mm_s, r.layer_sigma_mm);
  if (r.event_time_s >= 0.0)
    std::printf("%-12s step %.1f mm at %.1f s settled in %.3f s\n", "",
                r.event_step_mm, r.event_time_s, r.settle_time_s);
  std::printf(
      "%-12s solve ms mean %.3f max %.3f   counters: sat %ld trips %ld "
      "reroutes %ld fallbacks %ld\n",
      "", r.counters.solve_mean_ms, r.counters.solve_max_ms,
      r.counters.saturations, r.counters.watchdog_trips, r.counters.reroutes,
      r.counters.fallbacks);
}

// check.* gates; only consulted under --check.
int check_violations(const ScenarioConfig& cfg, const RunReport& r) {
  int violations = 0;
  auto flag = [&](bool bad, const char* what, double got, double limit) {
    if (!bad) return;
    ++violations;
    std::fprintf(stderr, "check: %s: %.4f exceeds %.4f\n", what, got, limit);
  };
  const double max_axis =
      std::max({r.axis[0].max, r.axis[1].max, r.axis[2].max});
  flag(max_axis >= cfg.check_max_err_mm, "max per-axis error mm", max_axis,
       cfg.check_max_err_mm);
  flag(std::abs(r.tail_drift_mm_s) >= cfg.check_drift_mm_s, "|tail drift| mm/s",
       std::abs(r.tail_drift_mm_s), cfg.check_drift_mm_s);
  if (cfg.step_time >= 0.0)
    flag(r.settle_time_s < 0.0 || r.settle_time_s >= cfg.check_settle_s,
         "settle time s", r.settle_time_s, cfg.check_settle_s);
  flag(r.counters.solve_max_ms >= cfg.check_solve_max_ms, "max solve ms",
       r.counters.solve_max_ms, cfg.check_solve_max_ms);
  return violations;
}

int cmd_run(const CommonOpts& opts) {
  const ScenarioConfig cfg = load_config(opts);
  const RunReport report =
      run_scenario(cfg, resolve_predictor(cfg), cfg.out_dir, opts.realtime);
  print_summary("run", report);
  std::printf("wrote %s/report.json\n", cfg.out_dir.c_str());
  if (opts.check && check_violations(cfg, report) > 0) return 3;
  return 0;
}

int cmd_ablation(const CommonOpts& opts) {
  const ScenarioConfig cfg = load_config(opts);
  const AblationResult res = run_ablation(cfg);
  print_summary("predictive", res.predictive);
  print_summary("reactive", res.reactive);
  std::printf("margin (reactive - predictive): %.3f mm\n", res.margin_mm);
  if (opts.check && res.margin_mm < 0.0) {
    std::fprintf(stderr, "check: predictive run tracked worse than reactive\n");
    return 3;
  }
  return 0;
}

int cmd_battery(const CommonOpts& opts) {
  const ScenarioConfig cfg = load_config(opts);
  const std::vector<BatteryEntry> entries = run_terrain_battery(cfg);
  for (const auto& e : entries)
    std::printf("%-8s mean height dev %.3f mm   trips %ld\n", e.name.c_str(),
                e.report.mean_height_dev_mm, e.report.counters.watchdog_trips);
  if (opts.check) {
    auto metric = [&](const char* name) {
      for (const auto& e : entries)
        if (e.name == name) return e.report.mean_height_dev_mm;
      return -1.0;
    };
    const double flat = metric("flat"), slope = metric("slope"),
                 grass = metric("grass"), mixed = metric("mixed"),
                 gravel = metric("gravel");
    const bool ordered =
        flat < slope && slope <= grass && grass <= mixed && mixed <= gravel;
    if (!ordered) {
      std::fprintf(stderr, "check: class ordering violated\n");
      return 3;
    }
  }
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  const ScenarioConfig cfg = load_config(opts);
  const TrainResult result = train_from_config(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string net_path = cfg.out_dir + "/net.json";
  result.net.save(net_path);

  nlohmann::json curves;
  curves["train_loss"] = result.train_loss;
  curves["val_loss"] = result.val_loss;
  curves["axis_val_mse"] = std::vector<double>(
      result.axis_val_mse.data(),
      result.axis_val_mse.data() + result.axis_val_mse.size());
  curves["axes_pinned"] = result.axes_pinned;
  std::ofstream out(cfg.out_dir + "/training.json", std::ios::binary);
  out << curves.dump(2) << "\n";

  std::printf("trained %zu epochs, final train loss %.6g, val loss %.6g\n",
              result.train_loss.empty() ? 0 : result.train_loss.size() - 1,
              result.train_loss.empty() ? 0.0 : result.train_loss.back(),
              result.val_loss.empty() ? 0.0 : result.val_loss.back());
  if (result.axis_val_mse.size() == 6) {
    std::printf("axis val mse:");
    for (int a = 0; a < 6; ++a) std::printf(" %.3f", result.axis_val_mse[a]);
    std::printf("  pinned:");
    for (int a : result.axes_pinned) std::printf(" %d", a);
    std::printf("\n");
  }
  std::printf("wrote %s\n", net_path.c_str());
  return 0;
}

int cmd_gen_data(const CommonOpts& opts) {
  const ScenarioConfig cfg = load_config(opts);
  const TrajectoryDataset data = gen_data(cfg);
  data.save(cfg.out_dir);
  long rows = 0;
  for (const auto& t : data.trajectories) rows += t.features.rows();
  std::printf("wrote %zu trajectories (%ld rows) to %s\n",
              data.trajectories.size(), rows, cfg.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"terrain-adaptive mobile printing simulator"};
  app.require_subcommand(1);

  CommonOpts run_opts, abl_opts, bat_opts, train_opts, gen_opts;
  add_common(app.add_subcommand("run", "simulate one scenario"), run_opts);
  add_common(app.add_subcommand("ablation", "predictive vs reactive, paired seeds"),
             abl_opts);
  add_common(app.add_subcommand("battery", "the five terrain-class presets"),
             bat_opts);
  add_common(app.add_subcommand("train", "build a dataset (or load one) and train"),
             train_opts);
  add_common(app.add_subcommand("gen-data", "drive traverses, save the dataset"),
             gen_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("run")) return cmd_run(run_opts);
    if (app.got_subcommand("ablation")) return cmd_ablation(abl_opts);
    if (app.got_subcommand("battery")) return cmd_battery(bat_opts);
    if (app.got_subcommand("train")) return cmd_train(train_opts);
    if (app.got_subcommand("gen-data")) return cmd_gen_data(gen_opts);
  } catch (const std::exception& e) {
    const std::string what = e.what();
    std::fprintf(stderr, "error: %s\n", what.c_str());
    return what.rfind("config:", 0) == 0 || what.rfind("seed override", 0) == 0
               ? 2
               : 1;
  }
  return 0;
}
