#include "world/path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "common/error.hpp"
#include "vehicle/bicycle.hpp"

namespace eidc::world {
namespace {

constexpr double kCircleFactor = 0.5522847498307936;  // 4/3 (sqrt 2 - 1)
constexpr int kSamples = 4000;

// Bezier parameter at connector arc length `target`.
double connector_parameter(const std::vector<double>& table, double target) {
  const auto it = std::lower_bound(table.begin(), table.end(), target);
  const auto hi = static_cast<std::size_t>(
      std::clamp<std::ptrdiff_t>(it - table.begin(), 1, static_cast<std::ptrdiff_t>(table.size()) - 1));
  const double frac = (target - table[hi - 1]) / (table[hi] - table[hi - 1]);
  return (static_cast<double>(hi - 1) + frac) / kSamples;
}

Vec2 bezier(const std::array<Vec2, 4>& c, double t) {
  const double u = 1.0 - t;
  return c[0] * (u * u * u) + c[1] * (3 * u * u * t) + c[2] * (3 * u * t * t) + c[3] * (t * t * t);
}

Vec2 bezier_d1(const std::array<Vec2, 4>& c, double t) {
  const double u = 1.0 - t;
  return (c[1] - c[0]) * (3 * u * u) + (c[2] - c[1]) * (6 * u * t) + (c[3] - c[2]) * (3 * t * t);
}

Vec2 bezier_d2(const std::array<Vec2, 4>& c, double t) {
  return (c[2] - c[1] * 2.0 + c[0]) * (6 * (1.0 - t)) + (c[3] - c[2] * 2.0 + c[1]) * (6 * t);
}

}  // namespace

const char* task_name(Task t) {
  switch (t) {
    case Task::kLeft:
      return "left";
    case Task::kStraight:
      return "straight";
    case Task::kRight:
      return "right";
  }
  return "?";
}

Task parse_task(const std::string& name) {
  if (name == "left") return Task::kLeft;
  if (name == "straight") return Task::kStraight;
  if (name == "right") return Task::kRight;
  throw ConfigError("unknown task '" + name + "' (expected left, straight or right)");
}

ReferencePath::ReferencePath(Vec2 entry, double entry_heading, Vec2 exit, double exit_heading, double lead_in,
                             double lead_out, const SpeedProfile& speed) {
  const Vec2 t0 = unit(entry_heading);
  const Vec2 t1 = unit(exit_heading);
  const Vec2 chord = exit - entry;
  const double turn = t0.cross(t1);
  if (std::abs(turn) < 1e-9) {
    const double reach = chord.dot(t0) / 3.0;
    controls_ = {entry, entry + t0 * reach, exit - t1 * reach, exit};
  } else {
    // Legs to the intersection of the two tangent lines.
    const double leg_in = chord.cross(t1) / turn;
    const double leg_out = -chord.cross(t0) / turn;
    controls_ = {entry, entry + t0 * (kCircleFactor * leg_in), exit - t1 * (kCircleFactor * leg_out), exit};
  }

  entry_ = entry;
  exit_ = exit;
  entry_heading_ = entry_heading;
  exit_heading_ = exit_heading;
  // Arc-length table of the connector.
  arc_table_.assign(kSamples + 1, 0.0);
  std::vector<double>& table = arc_table_;
  Vec2 prev = controls_[0];
  for (int i = 1; i <= kSamples; ++i) {
    const Vec2 p = bezier(controls_, static_cast<double>(i) / kSamples);
    table[i] = table[i - 1] + (p - prev).norm();
    prev = p;
  }
  const double connector = table.back();
  connector_start_ = lead_in;
  connector_end_ = lead_in + connector;
  const double total = lead_in + connector + lead_out;

  const auto count = static_cast<std::size_t>(std::floor(total / kPathSpacing)) + 1;
  points_.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double s = static_cast<double>(k) * kPathSpacing;
    PathPoint pt;
    pt.s = s;
    if (s <= connector_start_) {
      const Vec2 p = entry - t0 * (connector_start_ - s);
      pt.x = p.x;
      pt.y = p.y;
      pt.heading = entry_heading;
    } else if (s >= connector_end_) {
      const Vec2 p = exit + t1 * (s - connector_end_);
      pt.x = p.x;
      pt.y = p.y;
      pt.heading = exit_heading;
    } else {
      const double t = connector_parameter(table, s - connector_start_);
      const Vec2 p = bezier(controls_, t);
      const Vec2 d1 = bezier_d1(controls_, t);
      const Vec2 d2 = bezier_d2(controls_, t);
      pt.x = p.x;
      pt.y = p.y;
      pt.heading = std::atan2(d1.y, d1.x);
      pt.curvature = d1.cross(d2) / std::pow(d1.norm(), 3);
      if (std::abs(pt.curvature) < 1e-9) pt.curvature = 0.0;
    }
    pt.heading = vehicle::wrap_angle(pt.heading);
    pt.v_ref = speed.limit;
    if (pt.curvature != 0.0) {
      pt.v_ref = std::min(speed.limit, std::sqrt(speed.lateral_accel / std::abs(pt.curvature)));
    }
    points_.push_back(pt);
  }
  // Limit the slope of v_ref in both directions.
  const double step = speed.taper * kPathSpacing;
  for (std::size_t k = 1; k < points_.size(); ++k) {
    points_[k].v_ref = std::min(points_[k].v_ref, points_[k - 1].v_ref + step);
  }
  for (std::size_t k = points_.size() - 1; k-- > 0;) {
    points_[k].v_ref = std::min(points_[k].v_ref, points_[k + 1].v_ref + step);
  }
  for (auto& p : points_) p.v_ref = std::max(p.v_ref, speed.floor);
}

Vec2 ReferencePath::position(double s) const {
  if (s <= connector_start_) return entry_ - unit(entry_heading_) * (connector_start_ - s);
  if (s >= connector_end_) return exit_ + unit(exit_heading_) * (s - connector_end_);
  return bezier(controls_, connector_parameter(arc_table_, s - connector_start_));
}

std::size_t ReferencePath::nearest(double x, double y) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const double dx = points_[i].x - x, dy = points_[i].y - y;
    const double d = dx * dx + dy * dy;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

PathPoint ReferencePath::at(double s) const {
  if (s <= 0.0) return points_.front();
  if (s >= points_.back().s) return points_.back();
  const auto k = static_cast<std::size_t>(s / kPathSpacing);
  if (k + 1 >= points_.size()) return points_.back();
  const PathPoint& a = points_[k];
  const PathPoint& b = points_[k + 1];
  const double f = (s - a.s) / (b.s - a.s);
  PathPoint p;
  p.s = s;
  p.x = a.x + f * (b.x - a.x);
  p.y = a.y + f * (b.y - a.y);
  p.heading = vehicle::wrap_angle(a.heading + f * vehicle::wrap_angle(b.heading - a.heading));
  p.v_ref = a.v_ref + f * (b.v_ref - a.v_ref);
  p.curvature = a.curvature + f * (b.curvature - a.curvature);
  return p;
}

const PathPoint& ReferencePath::ahead(std::size_t index, double distance) const {
  const auto step = static_cast<std::size_t>(std::lround(distance / kPathSpacing));
  return points_[std::min(index + step, points_.size() - 1)];
}

TrackingQuery track(const ReferencePath& path, double x, double y, double vx, double heading) {
  TrackingQuery q;
  q.index = path.nearest(x, y);
  const PathPoint& r = path.points()[q.index];
  q.error.distance = -(x - r.x) * std::sin(r.heading) + (y - r.y) * std::cos(r.heading);
  q.error.speed = vx - r.v_ref;
  q.error.heading = vehicle::wrap_angle(heading - r.heading);
  return q;
}

}  // namespace eidc::world
