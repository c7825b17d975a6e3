#include "eval/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/version.hpp"
#include "objective/objective.hpp"
#include "trainer/sampler.hpp"

namespace eidc::eval {
namespace {

using world::Vec2;

double stop_speed(double gap, double decel) { return std::sqrt(2.0 * decel * std::max(0.0, gap)); }

bool on_crosswalk(Vec2 p) {
  const double lo = world::geom::kRoadHalf;
  const double hi = world::geom::kRoadHalf + world::geom::kCrosswalkWidth;
  const double ax = std::abs(p.x), ay = std::abs(p.y);
  return (ay >= lo && ay <= hi && ax <= lo) || (ax >= lo && ax <= hi && ay <= lo);
}

objective::Point front_center(const vehicle::EgoState& e) {
  return {e.x + 0.5 * e.length * std::cos(e.heading), e.y + 0.5 * e.length * std::sin(e.heading)};
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

int select_path(std::span<const double> values) {
  if (values.empty()) throw UsageError("select_path needs at least one value");
  int best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] < values[best]) best = static_cast<int>(k);
  }
  return best;
}

int select_path(const trainer::Networks& nets, const Observation& obs, world::Task task,
                const trainer::RolloutModel& model) {
  const nn::Matrix states = trainer::candidate_states(nets, obs, task, model);
  const nn::Matrix v = nn::forward(nets.value, states);
  const double values[3] = {v(0, 0), v(1, 0), v(2, 0)};
  return select_path(values);
}

double comfort_index(std::span<const double> a_lon, std::span<const double> a_lat) {
  if (a_lon.empty() || a_lon.size() != a_lat.size()) throw UsageError("comfort index needs equal, non-empty traces");
  double s = 0.0;
  for (std::size_t i = 0; i < a_lon.size(); ++i) s += a_lon[i] * a_lon[i] + a_lat[i] * a_lat[i];
  return std::sqrt(s / static_cast<double>(a_lon.size()));
}

vehicle::Action rule_based_controller(const Observation& obs, world::Task task, const trainer::RolloutModel& model,
                                      const RuleParams& p) {
  const vehicle::EgoState e = trainer::ego_from_x_else(obs.x_else);
  const world::ReferencePath& path = model.path(task, 1);
  const world::TrackingQuery q = world::track(path, e.x, e.y, e.vx, e.heading);
  const auto& pts = path.points();

  const double look = std::max(p.lookahead_min, p.lookahead_gain * e.vx);
  const world::PathPoint& target = path.ahead(q.index, look);
  const double dx = target.x - e.x, dy = target.y - e.y;
  const double alpha = vehicle::wrap_angle(std::atan2(dy, dx) - e.heading);
  double steer = std::atan(2.0 * p.wheelbase * std::sin(alpha) / std::max(std::hypot(dx, dy), 1e-3));
  steer = std::clamp(steer, model.bounds.steer_min, model.bounds.steer_max);

  double v_des = pts[q.index].v_ref;
  for (double d = 0.0; d <= 20.0; d += 2.0) {
    const world::PathPoint& ahead = path.ahead(q.index, d);
    v_des = std::min(v_des, std::sqrt(ahead.v_ref * ahead.v_ref + 2.0 * p.decel * d));
  }
  const double s_ego = pts[q.index].s;
  const int phase = static_cast<int>(obs.x_else[xe::kPhase]);
  double brake = model.bounds.accel_max;

  if (task != world::Task::kRight && !world::LightSystem::movement_green(phase, world::kSouth, task)) {
    const double d = objective::distance_before(model.map->ego_stop_line(task), front_center(e));
    if (d >= 0.0) {
      const double gap = d - model.safety.stop_line_distance - 0.5;
      if (gap <= 0.0) return {steer, model.bounds.accel_min};
      v_des = std::min(v_des, stop_speed(gap, p.decel));
      const double needed = e.vx * e.vx / (2.0 * gap);
      if (needed > 0.5 * p.decel) brake = -needed;
    }
  }

  // Pedestrians on a crosswalk the path crosses in the next 40 m.
  for (const ParticipantFeature& f : obs.pedestrians) {
    const Vec2 ped{e.x + f.rel_x, e.y + f.rel_y};
    if (!on_crosswalk(ped)) continue;
    for (double d = 0.0; d <= 40.0; d += 1.0) {
      const world::PathPoint& c = path.ahead(q.index, d);
      if (std::hypot(c.x - ped.x, c.y - ped.y) < 3.0) return {steer, model.bounds.accel_min};
    }
  }

  // Vehicles and bicycles: first conflict along the path ahead.
  std::vector<ParticipantFeature> movers = obs.vehicles;
  movers.insert(movers.end(), obs.bicycles.begin(), obs.bicycles.end());
  for (const ParticipantFeature& f : movers) {
    const Vec2 pos{e.x + f.rel_x, e.y + f.rel_y};
    const Vec2 dir{std::cos(f.heading), std::sin(f.heading)};
    for (double d = 0.0; d <= 50.0; d += 1.0) {
      const world::PathPoint& c = path.ahead(q.index, d);
      const Vec2 rel{c.x - pos.x, c.y - pos.y};
      const double along = rel.dot(dir);
      if (along < -0.5 * f.length) continue;
      if (std::abs(dir.cross(rel)) > 0.5 * (e.width + f.width) + 0.5) continue;
      const double gap = (c.s - s_ego) - 0.5 * (e.length + f.length);
      const bool same_way = std::abs(vehicle::wrap_angle(f.heading - c.heading)) < 0.5;
      double v_safe = v_des;
      if (same_way && along <= 0.5 * f.length) {
        const double vl = f.speed;
        v_safe = vl + (gap - p.min_gap - vl * p.reaction) / ((e.vx + vl) / (2.0 * p.decel) + p.reaction);
      } else {
        const double t_agent = std::max(0.0, along) / std::max(f.speed, 0.1);
        const double t_ego = (c.s - s_ego) / std::max(e.vx, 0.5);
        if (t_agent <= t_ego + 1.0 && t_agent < 10.0) v_safe = stop_speed(gap - p.min_gap, p.decel);
      }
      v_des = std::min(v_des, std::max(0.0, v_safe));
      break;
    }
  }
  const double accel =
      std::clamp(std::min(p.speed_gain * (v_des - e.vx), brake), model.bounds.accel_min, model.bounds.accel_max);
  return {steer, accel};
}

EpisodeMetrics run_episode(const trainer::Networks* nets, Controller controller, const world::IntersectionMap& map,
                           const trainer::RolloutModel& model, const EvalConfig& config, std::uint64_t seed,
                           std::vector<TrajectoryRow>* trajectory) {
  if (controller == Controller::kPolicy && nets == nullptr) throw UsageError("policy evaluation needs networks");
  world::WorldConfig wc = config.world;
  if (!config.spawn_traffic) wc.flow.scale = 0.0;
  world::World w(map, model.lights, wc, seed);
  w.disable_vehicle_source(world::kSouth, world::movement_lane(config.task));
  w.run(wc.warmup);
  double clock = config.start_clock;
  if (clock < 0.0) {
    std::mt19937_64 draw(seed ^ 0xc10cc10cULL);
    clock = std::uniform_real_distribution<double>(0.0, model.lights.cycle())(draw);
  }
  w.run(std::fmod(clock - w.light_clock() + 10.0 * model.lights.cycle(), model.lights.cycle()));
  for (const ScriptedAgent& a : config.scripted) w.add_agent(a.route, a.s, a.speed);

  const auto& candidates = map.candidates(config.task);
  const world::PathPoint start = candidates[1].at(config.start_s);
  vehicle::EgoState ego;
  ego.x = start.x;
  ego.y = start.y;
  ego.heading = start.heading;
  ego.vx = config.start_speed < 0.0 ? start.v_ref : config.start_speed;
  w.set_ego({ego, config.task, {}});

  EpisodeMetrics m;
  std::vector<double> a_lon, a_lat, latency;
  const auto max_steps = static_cast<int>(std::llround(config.max_seconds / wc.dt));
  const objective::StopLine line = map.ego_stop_line(config.task);
  int path = 1;
  for (int k = 0; k < max_steps; ++k) {
    const vehicle::EgoState before = w.ego()->state;
    const auto t0 = std::chrono::steady_clock::now();
    Observation obs = world::perceive(w.agents(), before, w.phase(), candidates[path], config.sensors, &w.noise_rng());
    vehicle::Action u;
    if (controller == Controller::kPolicy) {
      const nn::Matrix states = trainer::candidate_states(*nets, obs, config.task, model);
      const nn::Matrix v = nn::forward(nets->value, states);
      const double values[3] = {v(0, 0), v(1, 0), v(2, 0)};
      path = select_path(values);
      const nn::Matrix raw = nn::forward(nets->policy, nn::Matrix(states.row(path)));
      u = vehicle::squash_action({raw(0, 0), raw(0, 1)}, model.bounds);
    } else {
      u = rule_based_controller(obs, config.task, model);
    }
    latency.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());

    const bool red = config.task != world::Task::kRight &&
                     !world::LightSystem::movement_green(w.phase(), world::kSouth, config.task);
    const double d_before = objective::distance_before(line, front_center(before));
    w.step(&u, model.bicycle);
    const vehicle::EgoState& after = w.ego()->state;
    ++m.steps;
    a_lon.push_back((after.vx - before.vx) / wc.dt);
    a_lat.push_back(after.vx * after.yaw_rate);
    if (red && d_before >= 0.0 && objective::distance_before(line, front_center(after)) < 0.0) {
      ++m.red_light_violations;
    }
    if (trajectory != nullptr) trajectory->push_back({w.time(), after, u, path, w.phase(), w.agents()});

    if (world::ego_collides(w)) {
      m.collided = true;
      break;
    }
    if (!world::IntersectionMap::on_road({after.x, after.y})) {
      m.off_road = true;
      break;
    }
    const world::ReferencePath& sel = candidates[path];
    const std::size_t idx = world::track(sel, after.x, after.y, after.vx, after.heading).index;
    if (sel.points()[idx].s >= sel.connector_end() + config.pass_distance) {
      m.completed = true;
      m.time_to_pass = m.steps * wc.dt;
      break;
    }
  }
  m.comfort = a_lon.empty() ? 0.0 : comfort_index(a_lon, a_lat);
  m.latency_mean_ms = mean(latency);
  m.latency_max_ms = latency.empty() ? 0.0 : *std::max_element(latency.begin(), latency.end());
  return m;
}

std::string trajectory_csv(const std::vector<TrajectoryRow>& rows, std::uint64_t seed) {
  std::string s = fmt::format("# eidc {} seed={}\n", kVersion, seed);
  s += "t,x,y,heading,vx,vy,yaw_rate,steer,accel,path,phase,agents\n";
  for (const TrajectoryRow& r : rows) {
    s += fmt::format("{},{},{},{},{},{},{},{},{},{},{},", r.t, r.ego.x, r.ego.y, r.ego.heading, r.ego.vx, r.ego.vy,
                     r.ego.yaw_rate, r.action.steer, r.action.accel, r.path, r.phase);
    for (std::size_t i = 0; i < r.agents.size(); ++i) {
      const world::Agent& a = r.agents[i];
      s += fmt::format("{}{}:{}:{}:{}:{}", i ? ";" : "", a.id, static_cast<int>(a.kind), a.x, a.y, a.heading);
    }
    s += '\n';
  }
  return s;
}

std::string metrics_csv(const std::vector<EpisodeMetrics>& eps, std::uint64_t seed) {
  std::string s = fmt::format("# eidc {} seed={}\n", kVersion, seed);
  s += "episode,completed,collided,off_road,red_light_violations,time_to_pass,comfort,steps\n";
  std::vector<double> pass, comfort;
  int collisions = 0, violations = 0, completed = 0, off_road = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const EpisodeMetrics& m = eps[i];
    s += fmt::format("{},{},{},{},{},{},{},{}\n", i, int{m.completed}, int{m.collided}, int{m.off_road},
                     m.red_light_violations, m.completed ? fmt::format("{}", m.time_to_pass) : std::string(),
                     m.comfort, m.steps);
    if (m.completed) pass.push_back(m.time_to_pass);
    comfort.push_back(m.comfort);
    collisions += m.collided;
    violations += m.red_light_violations;
    completed += m.completed;
    off_road += m.off_road;
  }
  if (!eps.empty()) {
    s += fmt::format("all,{},{},{},{},{:.4f}±{:.4f},{:.4f}±{:.4f},\n", completed, collisions, off_road, violations,
                     mean(pass), stddev(pass), mean(comfort), stddev(comfort));
  }
  return s;
}

std::string latency_csv(const std::vector<EpisodeMetrics>& eps, std::uint64_t seed) {
  std::string s = fmt::format("# eidc {} seed={}\n", kVersion, seed);
  s += "episode,latency_mean_ms,latency_max_ms\n";
  std::vector<double> means;
  double worst = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    s += fmt::format("{},{:.4f},{:.4f}\n", i, eps[i].latency_mean_ms, eps[i].latency_max_ms);
    means.push_back(eps[i].latency_mean_ms);
    worst = std::max(worst, eps[i].latency_max_ms);
  }
  if (!eps.empty()) s += fmt::format("all,{:.4f}±{:.4f},{:.4f}\n", mean(means), stddev(means), worst);
  return s;
}

}  // namespace eidc::eval
