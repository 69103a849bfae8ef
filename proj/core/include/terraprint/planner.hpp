#ifndef TERRAPRINT_PLANNER_HPP
#define TERRAPRINT_PLANNER_HPP

#include <vector>

#include "terraprint/pose.hpp"
#include "terraprint/terrain.hpp"

namespace terraprint {

enum class SegmentHint { smooth, rough };

// Straight-line print segment evaluated by the unitless parameter s in [0,1]:
// position interpolates linearly from p0 to pf, orientation spherically.
struct PathSegment {
  Pose p0;
  Pose pf;
  double length{0.0};
  double v_max{0.5};
  SegmentHint hint{SegmentHint::smooth};
};

struct PathPlan {
  std::vector<PathSegment> segments;
  double total_length{0.0};
};

struct PlannerConfig {
  double chord_tol{2e-3};       // max chord-to-surface deviation, m
  double grad_trigger{0.017453292519943295};  // 1 deg normal change triggers split
  double min_segment{2e-3};     // subdivision floor, m
  double v_max{0.5};            // m/s
  double a_max{0.5};            // m/s^2
  double corner_stop_angle{0.5235987755982988};  // 30 deg: stop at sharp corners
};

// Pose at parameter s on one segment. Throws std::invalid_argument outside [0,1].
Pose eval_segment(const PathSegment& seg, double s);

// Densify waypoints against the terrain: segments whose end normals disagree by
// more than grad_trigger are bisected until the mid-chord height deviates from
// the terrain-following height (terrain + interpolated standoff) by at most
// chord_tol. Orientations are assigned terrain-normal-up, x along the path.
// Throws std::invalid_argument for fewer than 2 waypoints.
PathPlan segment_path(const std::vector<Pose>& waypoints, double chord_tol,
                      const TerrainField& field,
                      const PlannerConfig& cfg = PlannerConfig{});

// Trapezoidal velocity profile of one segment with boundary speeds.
struct SegmentProfile {
  double v_in{0.0};
  double v_out{0.0};
  double v_peak{0.0};
  double a{0.5};
  double duration{0.0};
  double t_start{0.0};
  // Distance traveled tau seconds into the segment (monotone in tau).
  double distance_at(double tau) const;
};

// Per-segment trapezoidal profiles: v=0 at plan start/end and at corners
// sharper than corner_stop_angle; rough-hint segments run at half v_max.
std::vector<SegmentProfile> plan_velocity(const PathPlan& plan,
                                          const PlannerConfig& cfg);

// A plan plus its time parameterization, queryable by simulation time.
class TimedPlan {
 public:
  TimedPlan() = default;
  TimedPlan(PathPlan plan, std::vector<SegmentProfile> profiles);

  Pose reference(double t) const;  // clamped to the plan ends
  double speed(double t) const;
  double duration() const { return duration_; }
  const PathPlan& geometry() const { return plan_; }
  const std::vector<SegmentProfile>& profiles() const { return profiles_; }

 private:
  PathPlan plan_;
  std::vector<SegmentProfile> profiles_;
  double duration_{0.0};
};

// Full upper-layer pass: densify + profile + timestamp.
TimedPlan build_plan(const std::vector<Pose>& waypoints,
                     const TerrainField& field, const PlannerConfig& cfg);

}  // namespace terraprint

#endif
