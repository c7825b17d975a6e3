#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <stdexcept>

#include "trainer/rollout.hpp"
#include "world/world.hpp"

namespace eidc::test {

using trainer::Networks;
using trainer::NetworkShape;
using trainer::Representation;
using trainer::RolloutModel;
using trainer::RolloutStart;

inline const world::IntersectionMap& shared_map() {
  static const world::IntersectionMap map;
  return map;
}

inline RolloutModel make_model(int horizon) {
  RolloutModel m;
  m.map = &shared_map();
  m.horizon = horizon;
  return m;
}

inline double clock_where(bool green, world::Task task) {
  for (int phase = 0; phase < 6; ++phase) {
    if (world::LightSystem::movement_green(phase, world::kSouth, task) == green) return phase * 20.0 + 1.0;
  }
  throw std::logic_error("no such phase");
}

inline vehicle::EgoState on_path(const world::ReferencePath& path, std::size_t index, double speed) {
  const world::PathPoint& p = path.points()[index];
  vehicle::EgoState e;
  e.x = p.x;
  e.y = p.y;
  e.heading = p.heading;
  e.vx = speed;
  return e;
}

inline RolloutStart make_start(const RolloutModel& model, world::Task task, int path, std::size_t index, double speed,
                        double clock, const std::vector<ParticipantFeature>& others) {
  RolloutStart s;
  s.task = task;
  s.path = path;
  s.light_clock = clock;
  const vehicle::EgoState e = on_path(model.path(task, path), index, speed);
  s.obs.x_else = world::make_x_else(e, model.phase_at(clock), model.path(task, path));
  for (const ParticipantFeature& f : others) {
    if (f.kind == ParticipantKind::kVehicle) s.obs.vehicles.push_back(f);
    if (f.kind == ParticipantKind::kBicycle) s.obs.bicycles.push_back(f);
    if (f.kind == ParticipantKind::kPedestrian) s.obs.pedestrians.push_back(f);
  }
  return s;
}

// A batch where tracking, collision and stop-line terms are all active.
inline std::vector<RolloutStart> busy_batch(const RolloutModel& model) {
  using K = ParticipantKind;
  std::vector<RolloutStart> batch;
  const double red = clock_where(false, world::Task::kStraight);
  const auto& path = model.path(world::Task::kStraight, 1);
  const std::size_t near_line = path.nearest(0.0, -world::geom::kStopLine - 8.0);
  batch.push_back(make_start(model, world::Task::kStraight, 1, near_line, 7.0, red,
                             {{0.6, 9.0, 2.0, std::numbers::pi / 2, 4.8, 2.0, K::kVehicle},
                              {2.2, 3.0, 3.0, std::numbers::pi / 2 + 0.1, 2.0, 0.48, K::kBicycle},
                              {-1.0, 12.0, 1.4, 0.0, 0.48, 0.48, K::kPedestrian}}));
  batch.push_back(make_start(model, world::Task::kRight, 2, 40, 5.0, 3.0,
                             {{-3.0, 6.0, 4.0, std::numbers::pi / 2, 4.8, 2.0, K::kVehicle}}));
  batch.back().u_prev = {0.05, 0.3};
  return batch;
}

inline Networks tiny_nets(Representation r, std::uint64_t seed) {
  NetworkShape shape;
  shape.hidden = 4;
  shape.representation = r;
  Networks n = Networks::create(shape, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 0.3);
  for (nn::MlpParams* p : {&n.encoder, &n.policy, &n.value}) {
    for (auto& b : p->biases) {
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = n01(rng);
    }
  }
  return n;
}


// Random start near the junction approach with a few nearby participants.
inline RolloutStart random_case(const RolloutModel& model, std::mt19937_64& rng, world::Task task) {
  std::uniform_int_distribution<int> path(0, 2);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int p = path(rng);
  const auto& ref = model.path(task, p);
  const std::size_t top = std::min(ref.points().size() - 1, static_cast<std::size_t>(ref.connector_end() / world::kPathSpacing));
  const std::size_t index = static_cast<std::size_t>(u01(rng) * static_cast<double>(top));
  std::vector<ParticipantFeature> others;
  const int count = static_cast<int>(u01(rng) * 4.0);
  for (int i = 0; i < count; ++i) {
    const auto kind = static_cast<ParticipantKind>(static_cast<int>(u01(rng) * 3.0));
    const Shape shape = default_shape(kind);
    others.push_back({-12.0 + 24.0 * u01(rng), -6.0 + 30.0 * u01(rng), 6.0 * u01(rng),
                      -std::numbers::pi + 2.0 * std::numbers::pi * u01(rng), shape.length, shape.width, kind});
  }
  RolloutStart s = make_start(model, task, p, index, 2.0 + 6.0 * u01(rng), 120.0 * u01(rng), others);
  s.u_prev = {0.2 * (u01(rng) - 0.5), 2.0 * (u01(rng) - 0.5)};
  return s;
}

}  // namespace eidc::test
