#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "objective/objective.hpp"
#include "world/geometry.hpp"

namespace eidc::world {

enum class Task : int { kLeft = 0, kStraight = 1, kRight = 2 };

const char* task_name(Task t);
// Throws ConfigError on anything but left, straight, right.
Task parse_task(const std::string& name);

struct PathPoint {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double v_ref = 0.0;
  double s = 0.0;
  double curvature = 0.0;
};

struct SpeedProfile {
  double limit = 8.0;           // m/s on straight lane segments
  double lateral_accel = 2.0;   // m/s^2 allowed in turns
  double taper = 0.5;           // max |dv_ref/ds|, 1/s
  double floor = 1.0;           // lowest v_ref
};

inline constexpr double kPathSpacing = 0.5;

// Straight lead-in, cubic Bezier connector, straight lead-out, resampled at
// kPathSpacing arc length.
class ReferencePath {
 public:
  ReferencePath() = default;
  ReferencePath(Vec2 entry, double entry_heading, Vec2 exit, double exit_heading, double lead_in, double lead_out,
                const SpeedProfile& speed);

  const std::vector<PathPoint>& points() const { return points_; }
  double length() const { return points_.empty() ? 0.0 : points_.back().s; }
  double connector_start() const { return connector_start_; }
  double connector_end() const { return connector_end_; }
  // Bezier control points of the connector.
  const std::array<Vec2, 4>& controls() const { return controls_; }

  // Exact geometry (not the resampled polyline) at arc length s.
  Vec2 position(double s) const;

  std::size_t nearest(double x, double y) const;
  // Linear interpolation by arc length, clamped to the ends.
  PathPoint at(double s) const;
  const PathPoint& ahead(std::size_t index, double distance) const;

  Task task = Task::kStraight;
  int target_lane = 0;

 private:
  std::vector<PathPoint> points_;
  std::array<Vec2, 4> controls_{};
  std::vector<double> arc_table_;
  Vec2 entry_;
  Vec2 exit_;
  double entry_heading_ = 0.0;
  double exit_heading_ = 0.0;
  double connector_start_ = 0.0;
  double connector_end_ = 0.0;
};

struct TrackingQuery {
  std::size_t index = 0;
  objective::TrackingError error;
};

// Signed lateral offset (positive left), speed error and wrapped heading error
// at the nearest path point.
TrackingQuery track(const ReferencePath& path, double x, double y, double vx, double heading);

}  // namespace eidc::world
