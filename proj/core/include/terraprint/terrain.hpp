#ifndef TERRAPRINT_TERRAIN_HPP
#define TERRAPRINT_TERRAIN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "terraprint/pose.hpp"
#include "terraprint/rng.hpp"

namespace terraprint {

enum class TerrainKind { flat, slope, rough, mixed };

std::string to_string(TerrainKind k);
TerrainKind terrain_kind_from_string(const std::string& s);

struct TerrainSpec {
  TerrainKind kind{TerrainKind::flat};
  double slope_angle{0.0};          // rad
  double slope_start{5.0};          // m along x
  double roughness_amplitude{0.0};  // m, bound on |height| of the rough part
  double roughness_cutoff{0.5};     // cycles/m, upper band limit
  std::uint64_t seed{1};
};

struct TerrainSample {
  double height{0.0};
  Eigen::Vector2d gradient{Eigen::Vector2d::Zero()};  // (dh/dx, dh/dy)
};

// Procedural height field. Deterministic in (spec, seed); C0 everywhere.
// The rough part is a sum of random-phase sinusoids, all strictly below the
// cutoff frequency, with amplitudes normalized so |rough| <= amplitude.
class TerrainField {
 public:
  static TerrainField build(const TerrainSpec& spec);

  TerrainSample query(double x, double y) const;
  double height(double x, double y) const { return query(x, y).height; }

  const TerrainSpec& spec() const { return spec_; }
  double max_gradient_norm() const { return max_gradient_norm_; }

 private:
  struct Wave {
    double amplitude;
    double kx, ky;  // angular spatial frequency, rad/m
    double phase;
  };

  TerrainSpec spec_;
  std::vector<Wave> waves_;
  double max_gradient_norm_{0.0};
};

// Small rigid perturbation of a wheel transform. Translation axes are
// truncated Gaussians with sigma = amplitude/3 and hard bound +-amplitude;
// rotation axes use sigma = (amplitude/3)/wheelbase bounded analogously.
Pose wheel_noise(RngStream& rng, double amplitude, double wheelbase = 1.2);

// Presets mirroring the terrain-class battery. Amplitudes are calibrated to
// preserve the difficulty ordering of the classes, not absolute field values.
struct TerrainClassPreset {
  std::string name;
  TerrainSpec spec;
  double wheel_noise_amplitude;  // m
};
std::vector<TerrainClassPreset> terrain_class_presets(std::uint64_t seed);

}  // namespace terraprint

#endif
