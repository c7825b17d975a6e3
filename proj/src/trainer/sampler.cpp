#include "trainer/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "vehicle/bicycle.hpp"

namespace eidc::trainer {

vehicle::Action policy_action(const Networks& nets, const Observation& obs, const vehicle::ActionBounds& bounds) {
  const nn::Vector raw = nn::forward(nets.policy, encode_state(nets, obs));
  return vehicle::squash_action({raw[0], raw[1]}, bounds);
}

Sampler::Sampler(const world::IntersectionMap& map, const world::LightSystem& lights, const SamplerConfig& config,
                 const RolloutModel& model, std::uint64_t seed)
    : config_(config), model_(&model), world_(map, lights, config.world, seed), rng_(seed + 0x5eed) {
  world_.disable_vehicle_source(world::kSouth, world::movement_lane(config.task));
  world_.run(config.world.warmup);
  start_episode();
}

void Sampler::start_episode() {
  world_.clear_ego();
  std::uniform_int_distribution<int> pick_path(0, 2);
  std::normal_distribution<double> n01;
  for (int attempt = 0;; ++attempt) {
    path_ = pick_path(rng_);
    const world::ReferencePath& path = model_->path(config_.task, path_);
    const double s_max = std::max(1.0, path.connector_end() - 5.0);
    const world::PathPoint p = path.at(std::uniform_real_distribution<double>(0.0, s_max)(rng_));
    const double offset = std::clamp(config_.lateral_jitter * n01(rng_), -1.0, 1.0);
    vehicle::EgoState e;
    e.x = p.x - offset * std::sin(p.heading);
    e.y = p.y + offset * std::cos(p.heading);
    e.heading = vehicle::wrap_angle(p.heading + config_.heading_jitter * n01(rng_));
    e.vx = std::uniform_real_distribution<double>(0.0, p.v_ref)(rng_);
    bool clear = true;
    for (const world::Agent& a : world_.agents()) {
      if (std::hypot(a.x - e.x, a.y - e.y) < config_.start_clearance) {
        clear = false;
        break;
      }
    }
    if (clear || attempt >= 100) {
      world_.set_ego({e, config_.task, {}});
      break;
    }
    world_.step();
  }
  episode_time_ = 0.0;
  ++episodes_;
}

bool Sampler::episode_over() const {
  const vehicle::EgoState& e = world_.ego()->state;
  const world::ReferencePath& path = model_->path(config_.task, path_);
  const world::TrackingQuery q = world::track(path, e.x, e.y, e.vx, e.heading);
  return episode_time_ >= config_.episode_seconds || std::abs(q.error.distance) > config_.max_tracking_error ||
         path.points()[q.index].s > std::min(path.connector_end() + config_.pass_distance, path.length() - 1.0);
}

std::vector<Experience> Sampler::collect(const Networks& nets, int steps) {
  std::vector<Experience> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const world::Ego& ego = *world_.ego();
    const world::ReferencePath& path = model_->path(config_.task, path_);
    Experience x;
    x.obs = world::perceive(world_.agents(), ego.state, world_.phase(), path, config_.sensors, &world_.noise_rng());
    x.light_clock = world_.light_clock();
    x.u_prev = ego.last_action;
    x.task = config_.task;
    const vehicle::Action u = policy_action(nets, x.obs, model_->bounds);
    out.push_back(std::move(x));
    world_.step(&u, model_->bicycle);
    episode_time_ += config_.world.dt;
    if (world::ego_collides(world_)) {
      ++collisions_;
      start_episode();
    } else if (episode_over()) {
      start_episode();
    }
  }
  return out;
}

}  // namespace eidc::trainer
