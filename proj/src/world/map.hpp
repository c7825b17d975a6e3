#pragma once

#include <array>
#include <vector>

#include "encoding/observation.hpp"
#include "objective/objective.hpp"
#include "world/path.hpp"

namespace eidc::world {

// Approach arms, counter-clockwise from the south. An arm's incoming lanes
// travel toward the center; the ego always enters from the south.
enum Arm : int { kSouth = 0, kEast = 1, kNorth = 2, kWest = 3 };

namespace geom {
inline constexpr double kLaneWidth = 3.75;
inline constexpr int kLanes = 3;
inline constexpr double kBikeWidth = 2.0;
inline constexpr double kSidewalkWidth = 2.0;
inline constexpr double kCrosswalkWidth = 4.0;
inline constexpr double kRoadHalf = kLanes * kLaneWidth + kBikeWidth;               // 13.25
inline constexpr double kSidewalkCenter = kRoadHalf + 0.5 * kSidewalkWidth;        // 14.25
inline constexpr double kCrosswalkCenter = kRoadHalf + 0.5 * kCrosswalkWidth;      // 15.25
inline constexpr double kStopLine = kRoadHalf + kCrosswalkWidth + 1.0;             // 18.25
inline constexpr double kBikeCenter = kLanes * kLaneWidth + 0.5 * kBikeWidth;      // 12.25
inline constexpr double kLeadIn = 100.0 - kStopLine;
inline constexpr double kLeadOut = 80.0;
constexpr double lane_center(int lane) { return (lane + 0.5) * kLaneWidth; }
}  // namespace geom

// Canonical frame is the south arm; other arms rotate by arm * 90 degrees.
Vec2 to_world(int arm, Vec2 canonical);
double heading_to_world(int arm, double canonical_heading);
int exit_arm(int arm, Task movement);
// Incoming lane used by each movement.
int movement_lane(Task movement);

struct Route {
  ReferencePath path;
  ParticipantKind kind = ParticipantKind::kVehicle;
  int arm = 0;
  Task movement = Task::kStraight;
  int lane = 0;
  double stop_s = 0.0;  // arc length of the stop line (or curb for pedestrians)
};

struct RouteSpeeds {
  SpeedProfile vehicle;
  double bicycle = 4.0;
  double pedestrian = 1.4;
};

class IntersectionMap {
 public:
  explicit IntersectionMap(const RouteSpeeds& speeds = {});

  // Three candidates from the ego entry lane to exit lanes 0, 1, 2.
  const std::array<ReferencePath, 3>& candidates(Task task) const {
    return candidates_[static_cast<std::size_t>(task)];
  }
  const std::vector<Route>& routes() const { return routes_; }
  const RouteSpeeds& speeds() const { return speeds_; }

  objective::StopLine stop_line(int arm, int lane) const;
  objective::StopLine ego_stop_line(Task task) const { return stop_line(kSouth, movement_lane(task)); }

  // Motor and bicycle lanes of all four arms plus the junction box.
  static bool on_road(Vec2 p);
  // Inside the square bounded by the four stop lines.
  static bool in_junction(Vec2 p);

 private:
  RouteSpeeds speeds_;
  std::array<std::array<ReferencePath, 3>, 3> candidates_;
  std::vector<Route> routes_;
};

}  // namespace eidc::world
