#include "terraprint/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace terraprint {
namespace {

using json = nlohmann::json;

constexpr double kSettleBand = 1e-3;    // m
constexpr double kSettleHold = 0.2;     // s
constexpr double kConstZTol = 1e-9;     // m between consecutive reference z
constexpr double kTransitionHalfWidth = 0.5;  // m of reference x around the slope foot

std::string checksum_hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json axis_json(const AxisStats& a) {
  return json{{"mean", a.mean}, {"sigma", a.sigma}, {"max", a.max}, {"p95", a.p95}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace

AxisStats abs_series_stats(const std::vector<double>& values) {
  AxisStats s;
  if (values.empty()) return s;
  const double n = double(values.size());
  double sum = 0.0;
  for (double v : values) {
    sum += v;
    s.max = std::max(s.max, v);
  }
  s.mean = sum / n;
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.sigma = std::sqrt(var / n);
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const size_t rank = size_t(std::ceil(0.95 * n));
  s.p95 = sorted[std::min(sorted.size() - 1, std::max<size_t>(rank, 1) - 1)];
  return s;
}

double ls_slope(const std::vector<double>& t, const std::vector<double>& y) {
  const size_t n = t.size();
  if (n < 2 || y.size() != n) return 0.0;
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (size_t i = 0; i < n; ++i) {
    st += t[i];
    sy += y[i];
    stt += t[i] * t[i];
    sty += t[i] * y[i];
  }
  const double denom = double(n) * stt - st * st;
  if (denom == 0.0) return 0.0;
  return (double(n) * sty - st * sy) / denom;
}

RunReport compute_report(const ScenarioConfig& cfg, RunLogs logs,
                         const RunCounters& counters) {
  RunReport r;
  r.logs = std::move(logs);
  r.counters = counters;
  r.config_echo = cfg.raw_text;
  r.feature_names = cfg.layout.names();
  r.duration_s = cfg.duration;
  r.event_step_mm = cfg.step_offset * 1e3;
  r.event_time_s = cfg.step_time;

  const auto& rows = r.logs.errors.rows;
  const auto& geo = r.logs.groundtruth.rows;

  // Per-axis stats (mm / mrad) over t > transient.
  for (int axis = 0; axis < 6; ++axis) {
    std::vector<double> series;
    series.reserve(rows.size());
    for (const auto& row : rows)
      if (row[0] > r.transient_s) series.push_back(std::abs(row[size_t(axis) + 1]) * 1e3);
    r.axis[size_t(axis)] = abs_series_stats(series);
  }
  r.mean_height_dev_mm = r.axis[2].mean;

  // Position error norm series for the drift fits and the ablation metric.
  std::vector<double> t_sel, e_sel, t_tail, e_tail;
  double enorm_sum = 0.0;
  size_t enorm_count = 0;
  for (const auto& row : rows) {
    const double t = row[0];
    const double e =
        std::sqrt(row[1] * row[1] + row[2] * row[2] + row[3] * row[3]) * 1e3;
    if (t > r.transient_s) {
      t_sel.push_back(t);
      e_sel.push_back(e);
      enorm_sum += e;
      ++enorm_count;
    }
    if (t >= 5.0) {
      t_tail.push_back(t);
      e_tail.push_back(e);
    }
  }
  r.mean_enorm_mm = enorm_count ? enorm_sum / double(enorm_count) : 0.0;
  r.drift_slope_mm_s = ls_slope(t_sel, e_sel);
  r.tail_drift_mm_s = ls_slope(t_tail, e_tail);

  // Settling time: first instant after the event from which |e_z| stays
  // inside the band for the full hold window.
  if (cfg.step_time >= 0.0 && !rows.empty()) {
    const double dt = rows.size() > 1 ? rows[1][0] - rows[0][0] : 0.01;
    const size_t hold = size_t(std::llround(kSettleHold / dt));
    for (size_t i = 0; i + hold <= rows.size(); ++i) {
      if (rows[i][0] < cfg.step_time) continue;
      bool inside = true;
      for (size_t j = i; j < i + hold && inside; ++j)
        inside = std::abs(rows[j][3]) < kSettleBand;
      if (inside) {
        r.settle_time_s = rows[i][0] - cfg.step_time;
        break;
      }
    }
  }

  // Layer-height consistency: sigma of the signed z error over spans where the
  // reference z is constant (flat deposition layers).
  {
    std::vector<double> z_err;
    for (size_t i = 1; i < geo.size() && i < rows.size(); ++i) {
      if (rows[i][0] <= r.transient_s) continue;
      if (std::abs(geo[i][3] - geo[i - 1][3]) >= kConstZTol) continue;
      z_err.push_back(rows[i][3] * 1e3);
    }
    if (!z_err.empty()) {
      double mean = 0.0;
      for (double v : z_err) mean += v;
      mean /= double(z_err.size());
      double var = 0.0;
      for (double v : z_err) var += (v - mean) * (v - mean);
      r.layer_sigma_mm = std::sqrt(var / double(z_err.size()));
    }
  }

  // Transition-window peak: reported, never gated.
  if (cfg.terrain.kind == TerrainKind::slope ||
      cfg.terrain.kind == TerrainKind::mixed) {
    double worst = -1.0;
    for (size_t i = 0; i < geo.size() && i < rows.size(); ++i) {
      if (std::abs(geo[i][1] - cfg.terrain.slope_start) > kTransitionHalfWidth)
        continue;
      const auto& row = rows[i];
      worst = std::max(worst, std::sqrt(row[1] * row[1] + row[2] * row[2] +
                                        row[3] * row[3]) *
                                  1e3);
    }
    r.transition_max_err_mm = worst;
  }

  return r;
}

std::string report_json(const RunReport& r) {
  json j;
  j["axes"] = json{{"ex_mm", axis_json(r.axis[0])}, {"ey_mm", axis_json(r.axis[1])},
                   {"ez_mm", axis_json(r.axis[2])}, {"rx_mrad", axis_json(r.axis[3])},
                   {"ry_mrad", axis_json(r.axis[4])}, {"rz_mrad", axis_json(r.axis[5])}};
  j["config_echo"] = r.config_echo;
  j["counters"] = json{{"saturations", r.counters.saturations},
                       {"watchdog_trips", r.counters.watchdog_trips},
                       {"reroutes", r.counters.reroutes},
                       {"qp_fallbacks", r.counters.fallbacks},
                       {"noise_checksum", checksum_hex(r.counters.noise_checksum)}};
  j["drift_slope_mm_per_s"] = r.drift_slope_mm_s;
  j["tail_drift_mm_per_s"] = r.tail_drift_mm_s;
  j["duration_s"] = r.duration_s;
  j["transient_s"] = r.transient_s;
  j["event"] = json{{"step_mm", r.event_step_mm},
                    {"time_s", r.event_time_s},
                    {"settle_s", r.settle_time_s},
                    {"protocol", "|e_z| < 1 mm sustained 0.2 s"}};
  j["feature_layout"] = r.feature_names;
  j["layer_height_sigma_mm"] = r.layer_sigma_mm;
  j["mean_enorm_mm"] = r.mean_enorm_mm;
  j["mean_height_dev_mm"] = r.mean_height_dev_mm;
  j["transition_max_err_mm"] = r.transition_max_err_mm;
  j["rows"] = json{{"errors", r.logs.errors.rows.size()},
                   {"mpc", r.logs.mpc.rows.size()},
                   {"groundtruth", r.logs.groundtruth.rows.size()}};
  j["versions"] = json{{"core", "0.1.0"},
                       {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                     std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION)}};
  return j.dump(2) + "\n";
}

void emit_report(const RunReport& r, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output dir '" + dir + "': " + ec.message());

  write_text(dir + "/report.json", report_json(r));

  json perf;
  perf["solve_ms"] = json{{"mean", r.counters.solve_mean_ms},
                          {"max", r.counters.solve_max_ms},
                          {"p95", r.counters.solve_p95_ms}};
  perf["wall_s"] = r.counters.wall_s;
  write_text(dir + "/perf.json", perf.dump(2) + "\n");

  csv::write(dir + "/errors.csv", r.logs.errors);
  csv::write(dir + "/mpc.csv", r.logs.mpc);
  csv::write(dir + "/groundtruth.csv", r.logs.groundtruth);
}

}  // namespace terraprint
