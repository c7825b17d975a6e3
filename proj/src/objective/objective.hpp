#pragma once

#include <array>
#include <span>
#include <vector>

#include "encoding/observation.hpp"
#include "vehicle/bicycle.hpp"

namespace eidc::objective {

struct UtilityWeights {
  double speed = 0.05;
  double distance = 0.8;
  double heading = 30.0;
  double yaw_rate = 0.02;
  double steer = 2.5;
  double steer_rate = 2.5;
  double accel = 0.05;
  double accel_rate = 0.05;
};

struct TrackingError {
  double distance = 0.0;  // signed, positive left of the path tangent
  double speed = 0.0;
  double heading = 0.0;
};

struct UtilityGradient {
  double distance = 0.0;
  double speed = 0.0;
  double heading = 0.0;
  double yaw_rate = 0.0;
  std::array<double, 2> action{};
  std::array<double, 2> previous_action{};
};

double utility(const TrackingError& err, double yaw_rate, const vehicle::Action& u, const vehicle::Action& u_prev,
               double dt, const UtilityWeights& w = {}, UtilityGradient* grad = nullptr);

enum class CenterOffset { kLengthPlusWidth, kLengthMinusWidth };

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct CirclePair {
  Point front;
  Point rear;
};

double center_offset(double length, double width, CenterOffset mode);
CirclePair circle_centers(double x, double y, double heading, double length, double width,
                          CenterOffset mode = CenterOffset::kLengthPlusWidth);

struct SafetyParams {
  double ego_radius = 1.75;
  double vehicle_radius = 1.75;
  double bicycle_radius = 2.0;
  double pedestrian_radius = 2.2;
  double stop_line_distance = 0.5;
  CenterOffset offset = CenterOffset::kLengthPlusWidth;

  double radius(ParticipantKind kind) const;
};

// A stop line crossing the ego lane: `point` is where the lane center meets
// the line, `direction` the unit approach direction.
struct StopLine {
  Point point;
  Point direction;
};

// `red` is true when the task's movement is stopped and the task is one the
// stop-line rule applies to (left or straight).
struct StopLineRule {
  bool red = false;
  StopLine line;
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double length = 4.8;
  double width = 2.0;
};

// Absolute-frame body of a surrounding participant.
struct Body {
  Pose pose;
  ParticipantKind kind = ParticipantKind::kVehicle;
};

// Distance of `p` before the line along the approach direction.
double distance_before(const StopLine& line, Point p);
// Rule active: red for the task and the ego center not yet past the line.
bool stop_line_active(const StopLineRule& rule, const Pose& ego);

enum class ConstraintKind { kParticipant, kStopLine };

struct Constraint {
  double g = 0.0;
  ConstraintKind kind = ConstraintKind::kParticipant;
  ParticipantKind participant = ParticipantKind::kVehicle;
};

using ConstraintSet = std::vector<Constraint>;

Pose ego_pose(const Observation& obs);
std::vector<Body> bodies(const Observation& obs);

// Four entries per participant (ego front/rear x other front/rear), then up to
// two stop-line entries.
ConstraintSet constraint_values(const Pose& ego, std::span<const Body> others, const StopLineRule& rule,
                                const SafetyParams& p = {});
ConstraintSet constraint_values(const Observation& obs, const StopLineRule& rule, const SafetyParams& p = {});

double penalty(const ConstraintSet& constraints);
// d penalty / d g for a single entry.
inline double penalty_slope(double g) { return g < 0.0 ? 2.0 * g : 0.0; }

struct PoseGradient {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

// penalty(constraint_values(...)) with its gradient w.r.t. the ego pose.
double pose_penalty(const Pose& ego, std::span<const Body> others, const StopLineRule& rule, const SafetyParams& p,
                    PoseGradient* grad = nullptr);

}  // namespace eidc::objective
