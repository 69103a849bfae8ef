#include <benchmark/benchmark.h>

#include "terraprint/pose.hpp"
#include "terraprint/terrain.hpp"

namespace {

using namespace terraprint;

static void BM_PoseCompose(benchmark::State& state) {
  Pose a, b;
  a.position = Vec3(1.0, 2.0, 0.5);
  a.orientation = from_rpy(0.1, 0.05, 0.7);
  b.position = Vec3(0.3, -0.1, 0.02);
  b.orientation = from_rpy(0.01, 0.02, -0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(compose(a, b));
  }
}
BENCHMARK(BM_PoseCompose);

static void BM_TerrainQuery(benchmark::State& state) {
  TerrainSpec spec;
  spec.kind = TerrainKind::mixed;
  spec.slope_angle = 0.0873;
  spec.roughness_amplitude = 6e-3;
  spec.roughness_cutoff = 0.5;
  spec.seed = 3;
  const auto field = TerrainField::build(spec);
  double x = 0.0;
  for (auto _ : state) {
    x += 1e-3;
    benchmark::DoNotOptimize(field.query(x, 0.2));
  }
}
BENCHMARK(BM_TerrainQuery);

}  // namespace

BENCHMARK_MAIN();
