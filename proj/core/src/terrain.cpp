#include "terraprint/terrain.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace terraprint {

std::string to_string(TerrainKind k) {
  switch (k) {
    case TerrainKind::flat:
      return "flat";
    case TerrainKind::slope:
      return "slope";
    case TerrainKind::rough:
      return "rough";
    case TerrainKind::mixed:
      return "mixed";
  }
  return "flat";
}

TerrainKind terrain_kind_from_string(const std::string& s) {
  if (s == "flat") return TerrainKind::flat;
  if (s == "slope") return TerrainKind::slope;
  if (s == "rough") return TerrainKind::rough;
  if (s == "mixed") return TerrainKind::mixed;
  throw std::invalid_argument("unknown terrain kind: " + s);
}

TerrainField TerrainField::build(const TerrainSpec& spec) {
  if (spec.roughness_cutoff > 0.5)
    throw std::invalid_argument(
        "roughness cutoff above 0.5 cycles/m is outside the supported "
        "terrain envelope");
  if (spec.slope_angle < 0.0 || spec.slope_angle > 15.0 * std::numbers::pi / 180.0)
    throw std::invalid_argument("slope angle must be within [0, 15] degrees");
  if (spec.roughness_amplitude < 0.0)
    throw std::invalid_argument("roughness amplitude must be >= 0");
  TerrainField field;
  field.spec_ = spec;

  const bool has_rough =
      (spec.kind == TerrainKind::rough || spec.kind == TerrainKind::mixed) &&
      spec.roughness_amplitude > 0.0;
  if (has_rough) {
    // Random directions, phases, and frequencies strictly inside the band
    // (0, cutoff). Raw weights are normalized so the amplitudes sum to the
    // requested bound, which caps |rough(x,y)| <= amplitude pointwise.
    constexpr int kWaves = 16;
    RngStream rng(RngStream::derive(spec.seed, 0x7e52a11ull));
    std::vector<Wave> waves(kWaves);
    double weight_sum = 0.0;
    for (auto& w : waves) {
      const double freq = spec.roughness_cutoff * rng.uniform(0.10, 0.95);
      const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double k = 2.0 * std::numbers::pi * freq;
      w.kx = k * std::cos(dir);
      w.ky = k * std::sin(dir);
      w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      w.amplitude = rng.uniform(0.2, 1.0);
      weight_sum += w.amplitude;
    }
    for (auto& w : waves) w.amplitude *= spec.roughness_amplitude / weight_sum;
    field.waves_ = std::move(waves);
  }

  const bool has_slope =
      spec.kind == TerrainKind::slope || spec.kind == TerrainKind::mixed;
  double bound = has_slope ? std::abs(std::tan(spec.slope_angle)) : 0.0;
  for (const auto& w : field.waves_)
    bound += std::abs(w.amplitude) * std::hypot(w.kx, w.ky);
  field.max_gradient_norm_ = bound;
  return field;
}

TerrainSample TerrainField::query(double x, double y) const {
  TerrainSample s;
  const bool has_slope =
      spec_.kind == TerrainKind::slope || spec_.kind == TerrainKind::mixed;
  if (has_slope && x > spec_.slope_start) {
    const double t = std::tan(spec_.slope_angle);
    s.height += (x - spec_.slope_start) * t;
    s.gradient.x() += t;
  }
  for (const auto& w : waves_) {
    const double arg = w.kx * x + w.ky * y + w.phase;
    s.height += w.amplitude * std::sin(arg);
    const double c = w.amplitude * std::cos(arg);
    s.gradient.x() += c * w.kx;
    s.gradient.y() += c * w.ky;
  }
  return s;
}

Pose wheel_noise(RngStream& rng, double amplitude, double wheelbase) {
  Pose p = Pose::identity();
  if (amplitude <= 0.0) return p;
  const double sigma = amplitude / 3.0;
  // Draw order is part of the reproducibility contract: dx, dy, dz, rx, ry, rz.
  p.position.x() = rng.truncated_normal(sigma, amplitude);
  p.position.y() = rng.truncated_normal(sigma, amplitude);
  p.position.z() = rng.truncated_normal(sigma, amplitude);
  const double rs = sigma / wheelbase;
  const double rb = amplitude / wheelbase;
  Vec3 rot(rng.truncated_normal(rs, rb), rng.truncated_normal(rs, rb),
           rng.truncated_normal(rs, rb));
  p.orientation = rotation_exp(rot);
  return p;
}

std::vector<TerrainClassPreset> terrain_class_presets(std::uint64_t seed) {
  const double deg = std::numbers::pi / 180.0;
  std::vector<TerrainClassPreset> out;
  auto add = [&](const std::string& name, TerrainKind kind, double slope_deg,
                 double amp_mm, double cutoff_cpm, double wheel_mm) {
    TerrainClassPreset p;
    p.name = name;
    p.spec.kind = kind;
    p.spec.slope_angle = slope_deg * deg;
    p.spec.slope_start = 5.0;
    p.spec.roughness_amplitude = amp_mm * 1e-3;
    p.spec.roughness_cutoff = cutoff_cpm;
    p.spec.seed = RngStream::derive(seed, 0xba77e2 + out.size());
    p.wheel_noise_amplitude = wheel_mm * 1e-3;
    out.push_back(std::move(p));
  };
  // Ordered easiest to hardest. The wheel-contact amplitude dominates the
  // end-effector error, so it increases monotonically; the slope classes add
  // a transient at the grade change on top of it.
  add("flat", TerrainKind::flat, 0.0, 0.0, 0.0, 0.0);
  add("slope", TerrainKind::slope, 5.0, 0.0, 0.0, 0.0);
  add("grass", TerrainKind::rough, 0.0, 6.0, 0.3, 3.0);
  add("mixed", TerrainKind::mixed, 5.0, 6.0, 0.3, 4.0);
  add("gravel", TerrainKind::rough, 0.0, 8.0, 0.5, 5.0);
  return out;
}

}  // namespace terraprint
