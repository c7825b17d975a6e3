#include "objective/objective.hpp"

#include <cmath>

#include "common/error.hpp"

namespace eidc::objective {

double utility(const TrackingError& e, double yaw_rate, const vehicle::Action& u, const vehicle::Action& up,
               double dt, const UtilityWeights& w, UtilityGradient* g) {
  const double steer_rate = (u.steer - up.steer) / dt;
  const double accel_rate = (u.accel - up.accel) / dt;
  const double value = w.speed * e.speed * e.speed + w.distance * e.distance * e.distance +
                       w.heading * e.heading * e.heading + w.yaw_rate * yaw_rate * yaw_rate +
                       w.steer * u.steer * u.steer + w.steer_rate * steer_rate * steer_rate +
                       w.accel * u.accel * u.accel + w.accel_rate * accel_rate * accel_rate;
  if (g != nullptr) {
    g->speed = 2.0 * w.speed * e.speed;
    g->distance = 2.0 * w.distance * e.distance;
    g->heading = 2.0 * w.heading * e.heading;
    g->yaw_rate = 2.0 * w.yaw_rate * yaw_rate;
    const double ds = 2.0 * w.steer_rate * steer_rate / dt;
    const double da = 2.0 * w.accel_rate * accel_rate / dt;
    g->action = {2.0 * w.steer * u.steer + ds, 2.0 * w.accel * u.accel + da};
    g->previous_action = {-ds, -da};
  }
  return value;
}

double center_offset(double length, double width, CenterOffset mode) {
  return mode == CenterOffset::kLengthPlusWidth ? 0.5 * (length + width) : 0.5 * (length - width);
}

CirclePair circle_centers(double x, double y, double heading, double length, double width, CenterOffset mode) {
  if (!(length > 0 && width > 0)) throw ConfigError("circle_centers needs a positive length and width");
  const double o = center_offset(length, width, mode);
  const double c = std::cos(heading), s = std::sin(heading);
  return {{x + o * c, y + o * s}, {x - o * c, y - o * s}};
}

double SafetyParams::radius(ParticipantKind kind) const {
  switch (kind) {
    case ParticipantKind::kVehicle:
      return vehicle_radius;
    case ParticipantKind::kBicycle:
      return bicycle_radius;
    case ParticipantKind::kPedestrian:
      return pedestrian_radius;
  }
  return vehicle_radius;
}

double distance_before(const StopLine& line, Point p) {
  return (line.point.x - p.x) * line.direction.x + (line.point.y - p.y) * line.direction.y;
}

bool stop_line_active(const StopLineRule& rule, const Pose& ego) {
  return rule.red && distance_before(rule.line, {ego.x, ego.y}) >= 0.0;
}

Pose ego_pose(const Observation& obs) {
  return {obs.x_else[xe::kEgoX], obs.x_else[xe::kEgoY], obs.x_else[xe::kHeading], obs.x_else[xe::kLength],
          obs.x_else[xe::kWidth]};
}

std::vector<Body> bodies(const Observation& obs) {
  const double ex = obs.x_else[xe::kEgoX], ey = obs.x_else[xe::kEgoY];
  std::vector<Body> out;
  for (const auto& f : obs.canonical_participants()) {
    out.push_back({{ex + f.rel_x, ey + f.rel_y, f.heading, f.length, f.width}, f.kind});
  }
  return out;
}

ConstraintSet constraint_values(const Pose& ego, std::span<const Body> others, const StopLineRule& rule,
                                const SafetyParams& p) {
  ConstraintSet out;
  out.reserve(4 * others.size() + 2);
  const CirclePair e = circle_centers(ego.x, ego.y, ego.heading, ego.length, ego.width, p.offset);
  for (const Body& b : others) {
    const CirclePair o = circle_centers(b.pose.x, b.pose.y, b.pose.heading, b.pose.length, b.pose.width, p.offset);
    const double threshold = p.ego_radius + p.radius(b.kind);
    for (const Point& ec : {e.front, e.rear}) {
      for (const Point& oc : {o.front, o.rear}) {
        out.push_back({std::hypot(ec.x - oc.x, ec.y - oc.y) - threshold, ConstraintKind::kParticipant, b.kind});
      }
    }
  }
  if (stop_line_active(rule, ego)) {
    for (const Point& ec : {e.front, e.rear}) {
      out.push_back({distance_before(rule.line, ec) - p.stop_line_distance, ConstraintKind::kStopLine});
    }
  }
  return out;
}

ConstraintSet constraint_values(const Observation& obs, const StopLineRule& rule, const SafetyParams& p) {
  const std::vector<Body> others = bodies(obs);
  return constraint_values(ego_pose(obs), others, rule, p);
}

double penalty(const ConstraintSet& constraints) {
  double sum = 0.0;
  for (const Constraint& c : constraints) {
    if (c.g < 0.0) sum += c.g * c.g;
  }
  return sum;
}

double pose_penalty(const Pose& ego, std::span<const Body> others, const StopLineRule& rule, const SafetyParams& p,
                    PoseGradient* grad) {
  const double o = center_offset(ego.length, ego.width, p.offset);
  const double c = std::cos(ego.heading), s = std::sin(ego.heading);
  // d(center)/d(heading) for front (+) and rear (-).
  const Point centers[2] = {{ego.x + o * c, ego.y + o * s}, {ego.x - o * c, ego.y - o * s}};
  const double sign[2] = {1.0, -1.0};
  double sum = 0.0;
  PoseGradient g;
  auto add = [&](int which, double value, double dgx, double dgy) {
    if (value >= 0.0) return;
    sum += value * value;
    const double slope = 2.0 * value;
    g.x += slope * dgx;
    g.y += slope * dgy;
    g.heading += slope * sign[which] * o * (-s * dgx + c * dgy);
  };
  for (const Body& b : others) {
    const double bo = center_offset(b.pose.length, b.pose.width, p.offset);
    const double bc = std::cos(b.pose.heading), bs = std::sin(b.pose.heading);
    const Point oc[2] = {{b.pose.x + bo * bc, b.pose.y + bo * bs}, {b.pose.x - bo * bc, b.pose.y - bo * bs}};
    const double threshold = p.ego_radius + p.radius(b.kind);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const double dx = centers[i].x - oc[j].x, dy = centers[i].y - oc[j].y;
        const double d = std::hypot(dx, dy);
        if (d - threshold >= 0.0) continue;
        if (d > 0.0) {
          add(i, d - threshold, dx / d, dy / d);
        } else {
          add(i, -threshold, 0.0, 0.0);
        }
      }
    }
  }
  if (stop_line_active(rule, ego)) {
    for (int i = 0; i < 2; ++i) {
      add(i, distance_before(rule.line, centers[i]) - p.stop_line_distance, -rule.line.direction.x,
          -rule.line.direction.y);
    }
  }
  if (grad != nullptr) *grad = g;
  return sum;
}

}  // namespace eidc::objective
