#include "terraprint/planner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace terraprint {
namespace {

Vec3 surface_normal(const TerrainField& field, double x, double y) {
  const auto g = field.query(x, y).gradient;
  return Vec3(-g.x(), -g.y(), 1.0).normalized();
}

Quat surface_orientation(const TerrainField& field, const Vec3& position,
                         const Vec3& path_dir) {
  const Vec3 n = surface_normal(field, position.x(), position.y());
  Vec3 fwd = path_dir;
  fwd.z() = 0.0;
  if (fwd.norm() < 1e-12) fwd = Vec3::UnitX();
  const Vec3 x_axis = (fwd - fwd.dot(n) * n).normalized();
  const Vec3 y_axis = n.cross(x_axis);
  Eigen::Matrix3d rot;
  rot.col(0) = x_axis;
  rot.col(1) = y_axis;
  rot.col(2) = n;
  return Quat(rot).normalized();
}

struct Node {
  Vec3 position;
  double standoff;  // height above terrain carried from the input waypoints
};

double terrain_following_z(const TerrainField& field, double x, double y,
                           double standoff) {
  return field.height(x, y) + standoff;
}

// Height mismatch between the straight chord and the terrain-following
// surface, probed at the quarter points.
double chord_deviation(const TerrainField& field, const Node& a,
                       const Node& b) {
  double worst = 0.0;
  for (double f : {0.25, 0.5, 0.75}) {
    const Vec3 p = (1.0 - f) * a.position + f * b.position;
    const double want = terrain_following_z(
        field, p.x(), p.y(), (1.0 - f) * a.standoff + f * b.standoff);
    worst = std::max(worst, std::abs(p.z() - want));
  }
  return worst;
}

double normal_change(const TerrainField& field, const Node& a, const Node& b) {
  const Vec3 na = surface_normal(field, a.position.x(), a.position.y());
  const Vec3 nb = surface_normal(field, b.position.x(), b.position.y());
  return std::acos(std::clamp(na.dot(nb), -1.0, 1.0));
}

void refine(const TerrainField& field, const PlannerConfig& cfg, const Node& a,
            const Node& b, std::vector<Node>& out) {
  const double span = (b.position - a.position).norm();
  const bool triggered = normal_change(field, a, b) > cfg.grad_trigger;
  if (span > cfg.min_segment && triggered &&
      chord_deviation(field, a, b) > cfg.chord_tol) {
    Node mid;
    mid.standoff = 0.5 * (a.standoff + b.standoff);
    const Vec3 m = 0.5 * (a.position + b.position);
    mid.position =
        Vec3(m.x(), m.y(), terrain_following_z(field, m.x(), m.y(), mid.standoff));
    refine(field, cfg, a, mid, out);
    refine(field, cfg, mid, b, out);
    return;
  }
  out.push_back(b);
}

}  // namespace

Pose eval_segment(const PathSegment& seg, double s) {
  if (s < 0.0 || s > 1.0)
    throw std::invalid_argument("segment parameter outside [0,1]");
  Pose p;
  p.position = (1.0 - s) * seg.p0.position + s * seg.pf.position;
  p.orientation = seg.p0.orientation.slerp(s, seg.pf.orientation);
  return p;
}

PathPlan segment_path(const std::vector<Pose>& waypoints, double chord_tol,
                      const TerrainField& field, const PlannerConfig& cfg_in) {
  if (waypoints.size() < 2)
    throw std::invalid_argument("segment_path needs at least 2 waypoints");
  if (chord_tol <= 0.0) throw std::invalid_argument("chord_tol must be > 0");
  PlannerConfig cfg = cfg_in;
  cfg.chord_tol = chord_tol;

  std::vector<Node> nodes;
  nodes.reserve(waypoints.size());
  for (const auto& wp : waypoints) {
    Node n;
    n.position = wp.position;
    n.standoff = wp.position.z() - field.height(wp.position.x(), wp.position.y());
    nodes.push_back(n);
  }

  std::vector<Node> dense;
  dense.push_back(nodes.front());
  for (size_t i = 0; i + 1 < nodes.size(); ++i)
    refine(field, cfg, nodes[i], nodes[i + 1], dense);

  const bool rough = field.spec().roughness_amplitude > 0.0;
  PathPlan plan;
  plan.segments.reserve(dense.size() - 1);
  for (size_t i = 0; i + 1 < dense.size(); ++i) {
    PathSegment seg;
    const Vec3 dir = dense[i + 1].position - dense[i].position;
    seg.p0.position = dense[i].position;
    seg.pf.position = dense[i + 1].position;
    seg.p0.orientation = surface_orientation(field, dense[i].position, dir);
    seg.pf.orientation = surface_orientation(field, dense[i + 1].position, dir);
    seg.length = dir.norm();
    seg.v_max = cfg.v_max;
    seg.hint = rough ? SegmentHint::rough : SegmentHint::smooth;
    plan.segments.push_back(seg);
    plan.total_length += seg.length;
  }
  return plan;
}

double SegmentProfile::distance_at(double tau) const {
  tau = std::clamp(tau, 0.0, duration);
  const double t_acc = a > 0.0 ? (v_peak - v_in) / a : 0.0;
  const double t_dec = a > 0.0 ? (v_peak - v_out) / a : 0.0;
  const double t_cruise = std::max(0.0, duration - t_acc - t_dec);
  if (tau <= t_acc) return v_in * tau + 0.5 * a * tau * tau;
  double d = v_in * t_acc + 0.5 * a * t_acc * t_acc;
  if (tau <= t_acc + t_cruise) return d + v_peak * (tau - t_acc);
  d += v_peak * t_cruise;
  const double td = tau - t_acc - t_cruise;
  return d + v_peak * td - 0.5 * a * td * td;
}

std::vector<SegmentProfile> plan_velocity(const PathPlan& plan,
                                          const PlannerConfig& cfg) {
  const size_t n = plan.segments.size();
  std::vector<SegmentProfile> profiles(n);
  if (n == 0) return profiles;

  auto seg_vmax = [&](size_t i) {
    const auto& s = plan.segments[i];
    return s.hint == SegmentHint::rough ? 0.5 * s.v_max : s.v_max;
  };

  // Junction speeds: zero at the plan ends and at sharp corners, otherwise
  // limited by the slower adjacent segment.
  std::vector<double> vj(n + 1, 0.0);
  for (size_t i = 1; i < n; ++i) {
    const Vec3 d0 =
        plan.segments[i - 1].pf.position - plan.segments[i - 1].p0.position;
    const Vec3 d1 = plan.segments[i].pf.position - plan.segments[i].p0.position;
    double turn = 0.0;
    if (d0.norm() > 1e-12 && d1.norm() > 1e-12)
      turn = std::acos(
          std::clamp(d0.normalized().dot(d1.normalized()), -1.0, 1.0));
    vj[i] = turn > cfg.corner_stop_angle
                ? 0.0
                : std::min(seg_vmax(i - 1), seg_vmax(i));
  }

  // Forward pass (acceleration feasibility), backward pass (deceleration).
  for (size_t i = 0; i < n; ++i) {
    const double reachable = std::sqrt(
        vj[i] * vj[i] + 2.0 * cfg.a_max * plan.segments[i].length);
    vj[i + 1] = std::min(vj[i + 1], reachable);
  }
  for (size_t i = n; i-- > 0;) {
    const double reachable = std::sqrt(
        vj[i + 1] * vj[i + 1] + 2.0 * cfg.a_max * plan.segments[i].length);
    vj[i] = std::min(vj[i], reachable);
  }

  double t0 = 0.0;
  for (size_t i = 0; i < n; ++i) {
    SegmentProfile& p = profiles[i];
    const double L = plan.segments[i].length;
    p.v_in = vj[i];
    p.v_out = vj[i + 1];
    p.a = cfg.a_max;
    p.t_start = t0;
    if (L < 1e-12) {
      p.v_peak = p.v_in;
      p.duration = 0.0;
      continue;
    }
    p.v_peak = std::min(
        seg_vmax(i),
        std::sqrt((2.0 * cfg.a_max * L + p.v_in * p.v_in + p.v_out * p.v_out) /
                  2.0));
    p.v_peak = std::max({p.v_peak, p.v_in, p.v_out});
    const double d_acc =
        (p.v_peak * p.v_peak - p.v_in * p.v_in) / (2.0 * cfg.a_max);
    const double d_dec =
        (p.v_peak * p.v_peak - p.v_out * p.v_out) / (2.0 * cfg.a_max);
    const double d_cruise = std::max(0.0, L - d_acc - d_dec);
    p.duration = (p.v_peak - p.v_in) / cfg.a_max +
                 (p.v_peak - p.v_out) / cfg.a_max +
                 (p.v_peak > 1e-12 ? d_cruise / p.v_peak : 0.0);
    t0 += p.duration;
  }
  return profiles;
}

TimedPlan::TimedPlan(PathPlan plan, std::vector<SegmentProfile> profiles)
    : plan_(std::move(plan)), profiles_(std::move(profiles)) {
  duration_ = profiles_.empty()
                  ? 0.0
                  : profiles_.back().t_start + profiles_.back().duration;
}

Pose TimedPlan::reference(double t) const {
  if (plan_.segments.empty()) return Pose::identity();
  if (t <= 0.0) return eval_segment(plan_.segments.front(), 0.0);
  if (t >= duration_) return eval_segment(plan_.segments.back(), 1.0);
  // Find the active segment; linear scan is fine at these plan sizes but the
  // profiles are sorted, so binary search keeps refresh cheap on dense plans.
  size_t lo = 0, hi = profiles_.size();
  while (lo + 1 < hi) {
    const size_t mid = (lo + hi) / 2;
    if (profiles_[mid].t_start <= t)
      lo = mid;
    else
      hi = mid;
  }
  const auto& prof = profiles_[lo];
  const auto& seg = plan_.segments[lo];
  if (seg.length < 1e-12 || prof.duration <= 0.0)
    return eval_segment(seg, 1.0);
  const double s =
      std::clamp(prof.distance_at(t - prof.t_start) / seg.length, 0.0, 1.0);
  return eval_segment(seg, s);
}

double TimedPlan::speed(double t) const {
  if (profiles_.empty() || t <= 0.0 || t >= duration_) return 0.0;
  size_t lo = 0, hi = profiles_.size();
  while (lo + 1 < hi) {
    const size_t mid = (lo + hi) / 2;
    if (profiles_[mid].t_start <= t)
      lo = mid;
    else
      hi = mid;
  }
  const auto& p = profiles_[lo];
  const double tau = t - p.t_start;
  const double t_acc = p.a > 0.0 ? (p.v_peak - p.v_in) / p.a : 0.0;
  const double t_dec = p.a > 0.0 ? (p.v_peak - p.v_out) / p.a : 0.0;
  const double t_cruise = std::max(0.0, p.duration - t_acc - t_dec);
  if (tau <= t_acc) return p.v_in + p.a * tau;
  if (tau <= t_acc + t_cruise) return p.v_peak;
  return std::max(0.0, p.v_peak - p.a * (tau - t_acc - t_cruise));
}

TimedPlan build_plan(const std::vector<Pose>& waypoints,
                     const TerrainField& field, const PlannerConfig& cfg) {
  PathPlan plan = segment_path(waypoints, cfg.chord_tol, field, cfg);
  return TimedPlan(plan, plan_velocity(plan, cfg));
}

}  // namespace terraprint
