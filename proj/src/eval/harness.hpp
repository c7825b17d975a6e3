#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "trainer/networks.hpp"
#include "trainer/rollout.hpp"
#include "world/world.hpp"

namespace eidc::eval {

struct EpisodeMetrics {
  double comfort = 0.0;  // m/s^2
  double time_to_pass = std::numeric_limits<double>::quiet_NaN();  // s, only when completed
  bool collided = false;
  bool off_road = false;
  int red_light_violations = 0;
  double latency_mean_ms = 0.0;
  double latency_max_ms = 0.0;
  bool completed = false;
  int steps = 0;
};

struct ScriptedAgent {
  int route = 0;
  double s = 0.0;
  double speed = 0.0;
};

struct EvalConfig {
  world::WorldConfig world;
  world::SensorConfig sensors;
  world::Task task = world::Task::kRight;
  double max_seconds = 180.0;
  double pass_distance = 20.0;  // m beyond the junction exit that counts as passed
  double start_s = 0.0;         // arc length on the candidate paths
  double start_speed = -1.0;    // negative: v_ref at the start point
  double start_clock = -1.0;    // light clock when the ego appears; negative draws it from the seed
  bool spawn_traffic = true;
  std::vector<ScriptedAgent> scripted;
};

enum class Controller { kPolicy, kRule };

struct TrajectoryRow {
  double t = 0.0;
  vehicle::EgoState ego;
  vehicle::Action action;
  int path = 0;
  int phase = 0;
  std::vector<world::Agent> agents;
};

// argmin over the three candidate values; ties go to the lowest index.
int select_path(std::span<const double> values);
int select_path(const trainer::Networks& nets, const Observation& obs, world::Task task,
                const trainer::RolloutModel& model);

// sqrt(mean(a_lon^2 + a_lat^2)); throws UsageError on an empty trace.
double comfort_index(std::span<const double> a_lon, std::span<const double> a_lat);

struct RuleParams {
  double lookahead_min = 4.0;
  double lookahead_gain = 0.5;  // s
  double wheelbase = 3.0;
  double decel = 2.5;           // planning deceleration
  double reaction = 1.0;
  double min_gap = 2.5;
  double speed_gain = 1.0;      // 1/s
};

// Rule stack on the middle candidate: pure pursuit, Krauss-style safe speed
// behind the leader and for agents arriving first at a conflict point, full
// braking for pedestrians on a crosswalk ahead, stopping at red.
vehicle::Action rule_based_controller(const Observation& obs, world::Task task, const trainer::RolloutModel& model,
                                      const RuleParams& params = {});

// One episode. `nets` is ignored for the rule controller.
EpisodeMetrics run_episode(const trainer::Networks* nets, Controller controller, const world::IntersectionMap& map,
                           const trainer::RolloutModel& model, const EvalConfig& config, std::uint64_t seed,
                           std::vector<TrajectoryRow>* trajectory = nullptr);

std::string trajectory_csv(const std::vector<TrajectoryRow>& rows, std::uint64_t seed);
std::string metrics_csv(const std::vector<EpisodeMetrics>& episodes, std::uint64_t seed);
std::string latency_csv(const std::vector<EpisodeMetrics>& episodes, std::uint64_t seed);

}  // namespace eidc::eval
