#include <doctest.h>

#include <cmath>

#include "../support/scenarios.hpp"
#include "common/error.hpp"
#include "eval/harness.hpp"

using namespace eidc;
using namespace eidc::eval;
using namespace eidc::test;

namespace {

EvalConfig quiet(world::Task task) {
  EvalConfig c;
  c.task = task;
  c.world.warmup = 0.0;
  c.spawn_traffic = false;
  c.max_seconds = 60.0;
  return c;
}

// Policy with constant output: zero steer, the given accel.
Networks constant_policy(double accel) {
  NetworkShape shape;
  shape.hidden = 4;
  Networks n = Networks::create(shape, 1);
  for (auto& w : n.policy.weights) w.setZero();
  for (auto& w : n.value.weights) w.setZero();
  const vehicle::ActionBounds b;
  n.policy.biases.back()[0] = 0.0;
  n.policy.biases.back()[1] = std::atanh(2.0 * (accel - b.accel_min) / (b.accel_max - b.accel_min) - 1.0);
  return n;
}

}  // namespace

TEST_CASE("path selection takes the smallest value") {
  CHECK(select_path(std::vector<double>{3.0, 1.0, 2.0}) == 1);
  CHECK(select_path(std::vector<double>{1.0, 1.0, 2.0}) == 0);
  CHECK(select_path(std::vector<double>{5.0, 4.0, 4.0}) == 1);
  CHECK(select_path(std::vector<double>{3.0 * 7.5, 1.0 * 7.5, 2.0 * 7.5}) == 1);
  CHECK(select_path(std::vector<double>{-1.0, 0.0, 2.0}) == 0);
}

TEST_CASE("comfort index examples") {
  const std::vector<double> zero(10, 0.0);
  const std::vector<double> one(10, 1.0);
  CHECK(comfort_index(zero, zero) == 0.0);
  CHECK(comfort_index(one, zero) == doctest::Approx(1.0));
  CHECK(comfort_index(std::vector<double>{3.0}, std::vector<double>{4.0}) == doctest::Approx(5.0));
  CHECK_THROWS_AS(comfort_index(std::vector<double>{}, std::vector<double>{}), UsageError);
}

TEST_CASE("rule controller yields to a pedestrian on the crosswalk ahead") {
  const RolloutModel model = make_model(25);
  const auto& path = model.path(world::Task::kStraight, 1);
  const vehicle::EgoState ego = on_path(path, path.nearest(path.points()[0].x, -32.0), 8.0);
  Observation obs;
  obs.x_else = world::make_x_else(ego, 0, path);
  obs.pedestrians.push_back({0.5, -world::geom::kCrosswalkCenter - ego.y, 1.4, 0.0, 0.48, 0.48,
                             ParticipantKind::kPedestrian});
  CHECK(rule_based_controller(obs, world::Task::kStraight, model).accel == model.bounds.accel_min);
  obs.pedestrians.clear();
  CHECK(rule_based_controller(obs, world::Task::kStraight, model).accel > model.bounds.accel_min);
}

TEST_CASE("rule controller tracks the reference speed on a free road") {
  const RolloutModel model = make_model(25);
  EvalConfig c = quiet(world::Task::kRight);
  c.start_speed = 2.0;
  std::vector<TrajectoryRow> rows;
  const EpisodeMetrics m = run_episode(nullptr, Controller::kRule, shared_map(), model, c, 3, &rows);
  CHECK(m.completed);
  CHECK_FALSE(m.collided);
  CHECK_FALSE(m.off_road);
  CHECK(m.red_light_violations == 0);
  REQUIRE(rows.size() > 60);
  const auto& path = model.path(world::Task::kRight, 1);
  // Before the junction the reference is the lane limit.
  const TrajectoryRow& r = rows[60];
  const world::TrackingQuery q = world::track(path, r.ego.x, r.ego.y, r.ego.vx, r.ego.heading);
  CHECK(std::abs(q.error.speed) <= 0.05 * path.points()[q.index].v_ref);
  for (const TrajectoryRow& row : rows) {
    CHECK(std::abs(world::track(path, row.ego.x, row.ego.y, row.ego.vx, row.ego.heading).error.distance) < 0.5);
  }
}

TEST_CASE("rule controller stops short of the line on red") {
  const RolloutModel model = make_model(25);
  EvalConfig c = quiet(world::Task::kStraight);
  c.start_clock = clock_where(false, world::Task::kStraight) - 1.0;
  c.start_s = 40.0;
  c.max_seconds = 15.0;
  std::vector<TrajectoryRow> rows;
  const EpisodeMetrics m = run_episode(nullptr, Controller::kRule, shared_map(), model, c, 3, &rows);
  CHECK(m.red_light_violations == 0);
  CHECK_FALSE(m.completed);
  const objective::StopLine line = shared_map().ego_stop_line(world::Task::kStraight);
  const vehicle::EgoState& last = rows.back().ego;
  const objective::Point front{last.x + 0.5 * last.length * std::cos(last.heading),
                               last.y + 0.5 * last.length * std::sin(last.heading)};
  CHECK(objective::distance_before(line, front) >= 0.5);
  CHECK(last.vx < 0.1);
}

TEST_CASE("empty episodes complete for every task") {
  const RolloutModel model = make_model(25);
  for (world::Task task : {world::Task::kLeft, world::Task::kStraight, world::Task::kRight}) {
    EvalConfig c = quiet(task);
    c.start_clock = clock_where(true, task) + 0.5;
    const EpisodeMetrics m = run_episode(nullptr, Controller::kRule, shared_map(), model, c, 1);
    CHECK(m.completed);
    CHECK_FALSE(m.collided);
    CHECK(m.red_light_violations == 0);
    CHECK(m.time_to_pass > 0.0);
  }
}

TEST_CASE("running a red light is counted") {
  const RolloutModel model = make_model(25);
  const Networks nets = constant_policy(1.0);
  EvalConfig c = quiet(world::Task::kStraight);
  c.start_clock = clock_where(false, world::Task::kStraight) - 1.0;
  c.start_s = 50.0;
  const EpisodeMetrics m = run_episode(&nets, Controller::kPolicy, shared_map(), model, c, 2);
  CHECK(m.red_light_violations == 1);
  CHECK_THROWS_AS(run_episode(nullptr, Controller::kPolicy, shared_map(), model, c, 2), UsageError);
}

TEST_CASE("episodes repeat exactly under a fixed seed with noise and traffic") {
  const RolloutModel model = make_model(25);
  const Networks nets = constant_policy(0.0);
  EvalConfig c;
  c.task = world::Task::kRight;
  c.world.warmup = 20.0;
  c.max_seconds = 20.0;
  std::vector<TrajectoryRow> a, b;
  const EpisodeMetrics ma = run_episode(&nets, Controller::kPolicy, shared_map(), model, c, 77, &a);
  const EpisodeMetrics mb = run_episode(&nets, Controller::kPolicy, shared_map(), model, c, 77, &b);
  CHECK(trajectory_csv(a, 77) == trajectory_csv(b, 77));
  CHECK(metrics_csv({ma}, 77) == metrics_csv({mb}, 77));
  CHECK(ma.latency_mean_ms > 0.0);
}

TEST_CASE("metrics csv shape") {
  const std::string empty = metrics_csv({}, 4);
  CHECK(empty.rfind("# eidc", 0) == 0);
  CHECK(empty.find("seed=4") != std::string::npos);
  CHECK(std::count(empty.begin(), empty.end(), '\n') == 2);
  EpisodeMetrics a;
  a.completed = true;
  a.time_to_pass = 10.0;
  a.comfort = 1.0;
  EpisodeMetrics b = a;
  b.time_to_pass = 12.0;
  b.collided = true;
  const std::string two = metrics_csv({a, b}, 4);
  CHECK(two.find("\nall,") != std::string::npos);
  CHECK(two.find(",11.0000±") != std::string::npos);
}
