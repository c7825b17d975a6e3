#include "world/map.hpp"

#include <cmath>
#include <numbers>

namespace eidc::world {
namespace {

constexpr double kNorthbound = std::numbers::pi / 2;

// Entry point of incoming lane `lane`-offset x on `arm`, at the stop line.
Vec2 entry_point(int arm, double x) { return to_world(arm, {x, -geom::kStopLine}); }
double entry_heading(int arm) { return heading_to_world(arm, kNorthbound); }
// Start of outgoing lane at offset x on `arm`, leaving the junction.
Vec2 exit_point(int arm, double x) { return to_world(arm, {-x, -geom::kStopLine}); }
double exit_heading(int arm) { return heading_to_world(arm, -kNorthbound); }

ReferencePath lane_path(int arm, double entry_x, int to_arm, double exit_x, const SpeedProfile& speed) {
  return ReferencePath(entry_point(arm, entry_x), entry_heading(arm), exit_point(to_arm, exit_x), exit_heading(to_arm),
                       geom::kLeadIn, geom::kLeadOut, speed);
}

}  // namespace

Vec2 to_world(int arm, Vec2 canonical) {
  switch (arm & 3) {
    case 0:
      return canonical;
    case 1:
      return {-canonical.y, canonical.x};
    case 2:
      return {-canonical.x, -canonical.y};
    default:
      return {canonical.y, -canonical.x};
  }
}

double heading_to_world(int arm, double canonical_heading) {
  return vehicle::wrap_angle(canonical_heading + (arm & 3) * std::numbers::pi / 2);
}

int exit_arm(int arm, Task movement) {
  switch (movement) {
    case Task::kRight:
      return (arm + 1) & 3;
    case Task::kStraight:
      return (arm + 2) & 3;
    case Task::kLeft:
      return (arm + 3) & 3;
  }
  return arm;
}

int movement_lane(Task movement) {
  switch (movement) {
    case Task::kLeft:
      return 0;
    case Task::kStraight:
      return 1;
    case Task::kRight:
      return 2;
  }
  return 1;
}

IntersectionMap::IntersectionMap(const RouteSpeeds& speeds) : speeds_(speeds) {
  for (Task task : {Task::kLeft, Task::kStraight, Task::kRight}) {
    const int lane = movement_lane(task);
    for (int exit_lane = 0; exit_lane < 3; ++exit_lane) {
      ReferencePath p = lane_path(kSouth, geom::lane_center(lane), exit_arm(kSouth, task),
                                  geom::lane_center(exit_lane), speeds.vehicle);
      p.task = task;
      p.target_lane = exit_lane;
      candidates_[static_cast<std::size_t>(task)][exit_lane] = std::move(p);
    }
  }

  for (int arm = 0; arm < 4; ++arm) {
    for (Task movement : {Task::kLeft, Task::kStraight, Task::kRight}) {
      const int lane = movement_lane(movement);
      Route r;
      r.path = lane_path(arm, geom::lane_center(lane), exit_arm(arm, movement), geom::lane_center(lane),
                         speeds.vehicle);
      r.path.task = movement;
      r.path.target_lane = lane;
      r.kind = ParticipantKind::kVehicle;
      r.arm = arm;
      r.movement = movement;
      r.lane = lane;
      r.stop_s = r.path.connector_start();
      routes_.push_back(std::move(r));
    }
  }
  SpeedProfile bike{speeds.bicycle, 2.0, 0.5, 0.5};
  for (int arm = 0; arm < 4; ++arm) {
    Route r;
    r.path = lane_path(arm, geom::kBikeCenter, exit_arm(arm, Task::kStraight), geom::kBikeCenter, bike);
    r.kind = ParticipantKind::kBicycle;
    r.arm = arm;
    r.lane = geom::kLanes;
    r.stop_s = r.path.connector_start();
    routes_.push_back(std::move(r));
  }
  SpeedProfile walk{speeds.pedestrian, 1.0, 1.0, speeds.pedestrian};
  for (int arm = 0; arm < 4; ++arm) {
    for (int dir = 0; dir < 2; ++dir) {
      const double side = dir == 0 ? -1.0 : 1.0;
      const Vec2 a = to_world(arm, {side * geom::kSidewalkCenter, -geom::kCrosswalkCenter});
      const Vec2 b = to_world(arm, {-side * geom::kSidewalkCenter, -geom::kCrosswalkCenter});
      const double h = std::atan2(b.y - a.y, b.x - a.x);
      Route r;
      r.path = ReferencePath(a, h, b, h, 0.0, 0.0, walk);
      r.kind = ParticipantKind::kPedestrian;
      r.arm = arm;
      r.lane = dir;
      r.stop_s = 0.0;
      routes_.push_back(std::move(r));
    }
  }
}

objective::StopLine IntersectionMap::stop_line(int arm, int lane) const {
  const Vec2 p = entry_point(arm, geom::lane_center(lane));
  const Vec2 d = unit(entry_heading(arm));
  return {{p.x, p.y}, {d.x, d.y}};
}

bool IntersectionMap::on_road(Vec2 p) {
  return std::abs(p.x) <= geom::kRoadHalf || std::abs(p.y) <= geom::kRoadHalf;
}

bool IntersectionMap::in_junction(Vec2 p) {
  return std::abs(p.x) <= geom::kStopLine && std::abs(p.y) <= geom::kStopLine;
}

}  // namespace eidc::world
