#include "world/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace eidc::world {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double route_rate(const FlowConfig& f, ParticipantKind kind) {
  switch (kind) {
    case ParticipantKind::kVehicle:
      return f.vehicles_per_hour * f.scale / 3600.0;
    case ParticipantKind::kBicycle:
      return f.bicycles_per_hour * f.scale / 3600.0;
    case ParticipantKind::kPedestrian:
      return f.pedestrians_per_hour * f.scale / 3600.0;
  }
  return 0.0;
}

double spawn_clearance(ParticipantKind kind) {
  switch (kind) {
    case ParticipantKind::kVehicle:
      return 20.0;
    case ParticipantKind::kBicycle:
      return 8.0;
    case ParticipantKind::kPedestrian:
      return 0.0;
  }
  return 0.0;
}

}  // namespace

World::World(const IntersectionMap& map, const LightSystem& lights, const WorldConfig& config, std::uint64_t seed)
    : map_(&map), lights_(lights), config_(config), rng_(seed), noise_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
  const auto& routes = map.routes();
  for (std::size_t r = 0; r < routes.size(); ++r) {
    Source src;
    src.route = static_cast<int>(r);
    src.rate = route_rate(config.flow, routes[r].kind);
    schedule(src);
    sources_.push_back(src);
  }
}

void World::schedule(Source& src) {
  if (src.rate <= 0.0) {
    src.next = std::numeric_limits<double>::infinity();
    return;
  }
  std::exponential_distribution<double> gap(src.rate);
  src.next = time_ + gap(rng_);
}

void World::disable_vehicle_source(int arm, int lane) {
  const auto& routes = map_->routes();
  for (Source& src : sources_) {
    const Route& r = routes[src.route];
    if (r.kind == ParticipantKind::kVehicle && r.arm == arm && r.lane == lane) {
      src.enabled = false;
      src.pending = 0;
    }
  }
}

void World::place(Agent& a) const {
  const PathPoint p = map_->routes()[a.route].path.at(a.s);
  a.x = p.x;
  a.y = p.y;
  a.heading = p.heading;
}

void World::add_agent(int route, double s, double speed) {
  const Route& r = map_->routes()[route];
  Agent a;
  a.id = next_id_++;
  a.route = route;
  a.kind = r.kind;
  a.s = s;
  a.speed = speed;
  a.waiting = r.kind == ParticipantKind::kPedestrian && s <= 0.0;
  const Shape shape = default_shape(r.kind);
  a.length = shape.length;
  a.width = shape.width;
  place(a);
  agents_.push_back(a);
}

double World::leader_speed_limit(const Agent& a) const {
  const FollowerConfig& f = config_.follower;
  const Vec2 u = unit(a.heading);
  double best_gap = std::numeric_limits<double>::infinity();
  double leader_v = 0.0;
  for (const Agent& b : agents_) {
    if (&b == &a || b.kind != a.kind) continue;
    const Vec2 d{b.x - a.x, b.y - a.y};
    const double lon = d.dot(u);
    if (lon <= 0.0 || lon > 60.0) continue;
    const double lat = std::abs(d.cross(u));
    if (lat > 0.5 * (a.width + b.width) + 0.3) continue;
    const double gap = lon - 0.5 * (a.length + b.length) - f.min_gap;
    if (gap < best_gap) {
      best_gap = gap;
      leader_v = b.speed;
    }
  }
  const Route& r = map_->routes()[a.route];
  const double front = a.s + 0.5 * a.length;
  const int phase = lights_.phase_at(time_);
  const bool green = r.kind == ParticipantKind::kBicycle ? LightSystem::bicycle_green(phase, r.arm)
                                                         : LightSystem::movement_green(phase, r.arm, r.movement);
  if (!green && front <= r.stop_s) {
    const double gap = r.stop_s - front - 0.5;
    if (gap < best_gap) {
      best_gap = gap;
      leader_v = 0.0;
    }
  }
  if (!std::isfinite(best_gap)) return std::numeric_limits<double>::infinity();
  const double g = std::max(0.0, best_gap);
  return leader_v + (g - leader_v * f.reaction) / (0.5 * (a.speed + leader_v) / f.decel + f.reaction);
}

void World::move_agents() {
  const double dt = config_.dt;
  const FollowerConfig& f = config_.follower;
  const int phase = lights_.phase_at(time_);
  const auto& routes = map_->routes();
  std::vector<double> next_speed(agents_.size());
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const Agent& a = agents_[i];
    const Route& r = routes[a.route];
    if (a.kind == ParticipantKind::kPedestrian) {
      const bool go = !a.waiting || LightSystem::walk(phase, r.arm);
      next_speed[i] = go ? map_->speeds().pedestrian : 0.0;
      continue;
    }
    const double v_max = r.path.at(a.s).v_ref;
    double v = std::min({v_max, a.speed + f.accel * dt, leader_speed_limit(a)});
    v = std::max(0.0, v - f.dawdle * f.accel * dt * u01(rng_));
    const bool green = a.kind == ParticipantKind::kBicycle ? LightSystem::bicycle_green(phase, r.arm)
                                                           : LightSystem::movement_green(phase, r.arm, r.movement);
    const double front = a.s + 0.5 * a.length;
    if (!green && front <= r.stop_s) v = std::min(v, (r.stop_s - front) / dt);
    next_speed[i] = std::max(0.0, v);
  }
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    Agent& a = agents_[i];
    a.speed = next_speed[i];
    if (a.waiting && a.speed > 0.0) a.waiting = false;
    a.s += a.speed * dt;
    place(a);
  }
  std::erase_if(agents_, [&](const Agent& a) { return a.s >= routes[a.route].path.length(); });
}

void World::spawn() {
  const auto& routes = map_->routes();
  for (Source& src : sources_) {
    while (src.next <= time_) {
      if (src.enabled) {
        ++arrivals_[static_cast<int>(routes[src.route].kind)];
        ++src.pending;
      }
      std::exponential_distribution<double> gap(src.rate);
      src.next += gap(rng_);
    }
    const Route& r = routes[src.route];
    while (src.pending > 0) {
      const double clear = spawn_clearance(r.kind);
      bool blocked = false;
      for (const Agent& a : agents_) {
        if (a.route == src.route && a.s - 0.5 * a.length < clear) {
          blocked = clear > 0.0;
          break;
        }
      }
      if (blocked) break;
      const double speed = r.kind == ParticipantKind::kPedestrian ? 0.0 : r.path.at(0.0).v_ref;
      add_agent(src.route, 0.0, speed);
      --src.pending;
      if (clear > 0.0) break;
    }
  }
}

void World::step(const vehicle::Action* ego_action, const vehicle::BicycleParams& params) {
  move_agents();
  if (ego_ && ego_action != nullptr) {
    ego_->state = vehicle::step_bicycle(ego_->state, *ego_action, config_.dt, params);
    ego_->last_action = *ego_action;
  }
  time_ += config_.dt;
  spawn();
}

void World::run(double seconds) {
  const auto steps = static_cast<long>(std::llround(seconds / config_.dt));
  for (long k = 0; k < steps; ++k) step();
}

OrientedBox ego_box(const vehicle::EgoState& e) { return {{e.x, e.y}, e.heading, e.length, e.width}; }

bool ego_collides(const World& world) {
  if (!world.ego()) return false;
  const OrientedBox box = ego_box(world.ego()->state);
  for (const Agent& a : world.agents()) {
    if (boxes_overlap(box, a.box())) return true;
  }
  return false;
}

std::array<double, kElseDim> make_x_else(const vehicle::EgoState& ego, int phase, const ReferencePath& path,
                                         TrackingQuery* query) {
  std::array<double, kElseDim> xe{};
  xe[xe::kEgoX] = ego.x;
  xe[xe::kEgoY] = ego.y;
  xe[xe::kVx] = ego.vx;
  xe[xe::kVy] = ego.vy;
  xe[xe::kHeading] = ego.heading;
  xe[xe::kYawRate] = ego.yaw_rate;
  xe[xe::kLength] = ego.length;
  xe[xe::kWidth] = ego.width;
  xe[xe::kPhase] = phase;
  const TrackingQuery q = track(path, ego.x, ego.y, ego.vx, ego.heading);
  xe[xe::kDistanceError] = q.error.distance;
  xe[xe::kSpeedError] = q.error.speed;
  xe[xe::kHeadingError] = q.error.heading;
  for (int k = 0; k < 3; ++k) {
    const PathPoint& p = path.ahead(q.index, xe::kPreviewDistances[k]);
    const int base = xe::kPreview + k * xe::kPreviewStride;
    xe[base] = p.x;
    xe[base + 1] = p.y;
    xe[base + 2] = p.heading;
    xe[base + 3] = p.v_ref;
  }
  if (query != nullptr) *query = q;
  return xe;
}

bool is_observable(const std::vector<Agent>& agents, std::size_t index, const vehicle::EgoState& ego,
                   const SensorConfig& s) {
  const Agent& a = agents[index];
  const Vec2 d{a.x - ego.x, a.y - ego.y};
  const double range = d.norm();
  const double bearing = std::abs(vehicle::wrap_angle(std::atan2(d.y, d.x) - ego.heading));
  const bool seen = range <= s.lidar_range || (range <= s.camera_range && bearing <= s.camera_half_fov * kDeg) ||
                    (range <= s.radar_range && bearing <= s.radar_half_fov * kDeg);
  if (!seen) return false;
  if (!s.occlusion) return true;
  const Vec2 from{ego.x, ego.y};
  const Vec2 to{a.x, a.y};
  for (std::size_t j = 0; j < agents.size(); ++j) {
    if (j == index) continue;
    const Agent& b = agents[j];
    // Cheap reject: blocker must be within the segment's bounding region.
    const double reach = 0.5 * std::hypot(b.length, b.width);
    if (std::max(from.x, to.x) + reach < b.x || std::min(from.x, to.x) - reach > b.x) continue;
    if (std::max(from.y, to.y) + reach < b.y || std::min(from.y, to.y) - reach > b.y) continue;
    if (segment_hits_box(from, to, b.box())) return false;
  }
  return true;
}

Observation perceive(const std::vector<Agent>& agents, const vehicle::EgoState& ego, int phase,
                     const ReferencePath& path, const SensorConfig& s, std::mt19937_64* noise) {
  Observation obs;
  std::normal_distribution<double> n01;
  auto jitter = [&](double sigma) { return (noise != nullptr && sigma > 0.0) ? sigma * n01(*noise) : 0.0; };
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (!is_observable(agents, i, ego, s)) continue;
    const Agent& a = agents[i];
    ParticipantFeature f;
    f.rel_x = a.x - ego.x + jitter(s.position_noise);
    f.rel_y = a.y - ego.y + jitter(s.position_noise);
    f.speed = std::max(0.0, a.speed + jitter(s.speed_noise));
    f.heading = vehicle::wrap_angle(a.heading + jitter(s.heading_noise));
    f.length = a.length;
    f.width = a.width;
    f.kind = a.kind;
    switch (a.kind) {
      case ParticipantKind::kVehicle:
        obs.vehicles.push_back(f);
        break;
      case ParticipantKind::kBicycle:
        obs.bicycles.push_back(f);
        break;
      case ParticipantKind::kPedestrian:
        obs.pedestrians.push_back(f);
        break;
    }
  }
  obs.x_else = make_x_else(ego, phase, path);
  return obs;
}

}  // namespace eidc::world
