#ifndef TERRAPRINT_RNG_HPP
#define TERRAPRINT_RNG_HPP

#include <cstdint>
#include <random>

namespace terraprint {

// Seeded random stream. Every consumer in the simulator owns its own stream so
// that draw order is independent of unrelated components.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  double normal(double sigma) { return sigma <= 0.0 ? 0.0 : sigma * normal01_(gen_); }

  // Gaussian truncated by rejection to [-bound, bound].
  double truncated_normal(double sigma, double bound) {
    if (sigma <= 0.0 || bound <= 0.0) return 0.0;
    for (;;) {
      const double x = sigma * normal01_(gen_);
      if (std::abs(x) <= bound) return x;
    }
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01_(gen_);
  }

  std::uint64_t integer() { return gen_(); }

  // Deterministic child-seed derivation (splitmix64 on base ^ salt).
  static std::uint64_t derive(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal01_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform01_{0.0, 1.0};
};

}  // namespace terraprint

#endif
