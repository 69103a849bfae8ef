#ifndef TERRAPRINT_REPORT_HPP
#define TERRAPRINT_REPORT_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "terraprint/csv.hpp"
#include "terraprint/scenario.hpp"

namespace terraprint {

// Stats of one |error| series: mean, population sigma, max, and the
// nearest-rank 95th percentile, all over samples after the start transient.
struct AxisStats {
  double mean{0.0};
  double sigma{0.0};
  double max{0.0};
  double p95{0.0};
};

// The three log tables a run writes. Columns:
//   errors:      t, ex, ey, ez (m), rx, ry, rz (rad)         at 100 Hz
//   mpc:         t, e*(6), dhat*(6), u*(5), cost, active, iterations,
//                fallback                                    at 10 Hz
//   groundtruth: t, ref xyz, ee xyz, base xyz, yaw, arm xyz  at 100 Hz
struct RunLogs {
  csv::Table errors;
  csv::Table mpc;
  csv::Table groundtruth;
};

struct RunCounters {
  long saturations{0};
  long watchdog_trips{0};
  long reroutes{0};
  long fallbacks{0};
  std::uint64_t noise_checksum{0};
  // Wall-clock figures; kept out of report.json so it stays deterministic.
  double solve_mean_ms{0.0};
  double solve_max_ms{0.0};
  double solve_p95_ms{0.0};
  double wall_s{0.0};
};

struct RunReport {
  // Position axes in mm, rotation axes in mrad, over t > transient.
  std::array<AxisStats, 6> axis;
  double transient_s{1.0};

  double mean_enorm_mm{0.0};       // mean ||position error||
  double mean_height_dev_mm{0.0};  // mean |z error|, the terrain-class metric
  double drift_slope_mm_s{0.0};    // LS slope of ||e|| vs t, t >= transient
  double tail_drift_mm_s{0.0};     // same over t in [5, end]
  double settle_time_s{-1.0};      // -1: no event configured or never settled
  double layer_sigma_mm{0.0};      // sigma of z error over constant-z spans
  double transition_max_err_mm{-1.0};  // max ||e|| while ref x in slope
                                       // transition band; -1 if none
  double event_step_mm{0.0};
  double event_time_s{-1.0};

  RunCounters counters;
  std::string config_echo;
  std::vector<std::string> feature_names;
  double duration_s{0.0};

  RunLogs logs;
};

// All stats are computed from the log tables alone, so re-reading the CSVs and
// recomputing yields the same numbers to the last bit.
RunReport compute_report(const ScenarioConfig& cfg, RunLogs logs,
                         const RunCounters& counters);

// Deterministic report body (everything except wall-clock timings).
std::string report_json(const RunReport& r);

// Writes report.json, perf.json (the wall-clock sidecar; the only
// nondeterministic artifact), errors.csv, mpc.csv, groundtruth.csv.
void emit_report(const RunReport& r, const std::string& dir);

// Shared stat helpers, exposed so tests can recompute from re-read CSVs.
AxisStats abs_series_stats(const std::vector<double>& values);
double ls_slope(const std::vector<double>& t, const std::vector<double>& y);

}  // namespace terraprint

#endif
