#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "encoding/observation.hpp"
#include "vehicle/bicycle.hpp"
#include "world/geometry.hpp"
#include "world/lights.hpp"
#include "world/map.hpp"

namespace eidc::world {

struct FlowConfig {
  double vehicles_per_hour = 400.0;    // per motor lane
  double bicycles_per_hour = 100.0;    // per bicycle lane
  double pedestrians_per_hour = 400.0; // per crosswalk direction
  double scale = 1.0;
};

// Krauss-style car following.
struct FollowerConfig {
  double accel = 2.6;
  double decel = 4.5;
  double reaction = 1.0;
  double min_gap = 2.5;
  double dawdle = 0.5;
};

struct SensorConfig {
  double camera_range = 80.0;
  double camera_half_fov = 35.0;  // degrees
  double radar_range = 60.0;
  double radar_half_fov = 45.0;
  double lidar_range = 70.0;
  bool occlusion = true;
  double position_noise = 0.1;
  double speed_noise = 0.1;
  double heading_noise = 0.02;
};

struct WorldConfig {
  FlowConfig flow;
  FollowerConfig follower;
  double dt = 0.1;
  double warmup = 60.0;  // seconds simulated before the ego appears
};

struct Agent {
  std::uint64_t id = 0;
  int route = 0;
  ParticipantKind kind = ParticipantKind::kVehicle;
  double s = 0.0;
  double speed = 0.0;
  bool waiting = false;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;

  OrientedBox box() const { return {{x, y}, heading, length, width}; }
};

struct Ego {
  vehicle::EgoState state;
  Task task = Task::kRight;
  vehicle::Action last_action;
};

class World {
 public:
  World(const IntersectionMap& map, const LightSystem& lights, const WorldConfig& config, std::uint64_t seed);

  const IntersectionMap& map() const { return *map_; }
  const LightSystem& lights() const { return lights_; }
  const WorldConfig& config() const { return config_; }

  double time() const { return time_; }
  int phase() const { return lights_.phase_at(time_); }
  double light_clock() const { return lights_.clock(time_); }

  const std::vector<Agent>& agents() const { return agents_; }
  std::vector<Agent>& mutable_agents() { return agents_; }
  void add_agent(int route, double s, double speed);

  // Stops Poisson arrivals on one incoming vehicle lane.
  void disable_vehicle_source(int arm, int lane);
  std::uint64_t arrivals(ParticipantKind kind) const { return arrivals_[static_cast<int>(kind)]; }

  const std::optional<Ego>& ego() const { return ego_; }
  void set_ego(const Ego& ego) { ego_ = ego; }
  void clear_ego() { ego_.reset(); }

  // Advances lights, agents, the ego (when present) and arrivals by dt.
  void step(const vehicle::Action* ego_action = nullptr, const vehicle::BicycleParams& params = {});
  void run(double seconds);

  std::mt19937_64& noise_rng() { return noise_rng_; }

 private:
  struct Source {
    int route = 0;
    double rate = 0.0;  // per second
    double next = 0.0;
    int pending = 0;
    bool enabled = true;
  };

  void place(Agent& a) const;
  void schedule(Source& src);
  void move_agents();
  void spawn();
  double leader_speed_limit(const Agent& a) const;

  const IntersectionMap* map_;
  LightSystem lights_;
  WorldConfig config_;
  std::mt19937_64 rng_;
  std::mt19937_64 noise_rng_;
  double time_ = 0.0;
  std::uint64_t next_id_ = 1;
  std::vector<Agent> agents_;
  std::vector<Source> sources_;
  std::array<std::uint64_t, 3> arrivals_{};
  std::optional<Ego> ego_;
};

// Ego octet, phase, tracking errors and previews against `path`.
std::array<double, kElseDim> make_x_else(const vehicle::EgoState& ego, int phase, const ReferencePath& path,
                                         TrackingQuery* query = nullptr);

// Sensor model: range/FOV union, ray occlusion by other agents' footprints,
// Gaussian noise drawn from `noise` (skipped when null or when sigma is 0).
Observation perceive(const std::vector<Agent>& agents, const vehicle::EgoState& ego, int phase,
                     const ReferencePath& path, const SensorConfig& sensors, std::mt19937_64* noise);

OrientedBox ego_box(const vehicle::EgoState& ego);
// True when the ego footprint overlaps any agent footprint.
bool ego_collides(const World& world);

bool is_observable(const std::vector<Agent>& agents, std::size_t index, const vehicle::EgoState& ego,
                   const SensorConfig& sensors);

}  // namespace eidc::world
