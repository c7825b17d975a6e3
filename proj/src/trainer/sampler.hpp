#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "trainer/buffer.hpp"
#include "trainer/networks.hpp"
#include "trainer/rollout.hpp"
#include "world/world.hpp"

namespace eidc::trainer {

struct SamplerConfig {
  world::WorldConfig world;
  world::SensorConfig sensors;
  world::Task task = world::Task::kRight;
  double episode_seconds = 30.0;
  double start_clearance = 10.0;  // m between the ego and any agent at spawn
  double lateral_jitter = 0.5;    // m, std of the start offset from the path
  double heading_jitter = 0.05;   // rad
  double max_tracking_error = 4.0;
  double pass_distance = 20.0;  // m past the junction exit that ends an episode
};

// Policy action for one observation: s = U(obs), u = squash(pi(s)).
vehicle::Action policy_action(const Networks& nets, const Observation& obs, const vehicle::ActionBounds& bounds);

// One actor: its own world, driving the current policy on a per-episode
// candidate path and emitting the observation of every step.
class Sampler {
 public:
  Sampler(const world::IntersectionMap& map, const world::LightSystem& lights, const SamplerConfig& config,
          const RolloutModel& model, std::uint64_t seed);

  std::vector<Experience> collect(const Networks& nets, int steps);

  std::uint64_t episodes() const { return episodes_; }
  std::uint64_t collisions() const { return collisions_; }

 private:
  void start_episode();
  bool episode_over() const;

  SamplerConfig config_;
  const RolloutModel* model_;
  world::World world_;
  std::mt19937_64 rng_;
  int path_ = 0;
  double episode_time_ = 0.0;
  std::uint64_t episodes_ = 0;
  std::uint64_t collisions_ = 0;
};

}  // namespace eidc::trainer
