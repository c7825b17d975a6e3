#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "../support/scenarios.hpp"
#include "mpc/oracle.hpp"

using namespace eidc;
using namespace eidc::trainer;
using namespace eidc::test;

namespace {

double raw_for(double u, double lo, double hi) { return std::atanh(2.0 * (u - lo) / (hi - lo) - 1.0); }

// Best cost over a grid x grid lattice of cell-centred actions.
double grid_best(const RolloutStart& start, const RolloutModel& model, double rho, int grid) {
  const vehicle::ActionBounds& b = model.bounds;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    const double steer = b.steer_min + (b.steer_max - b.steer_min) * (i + 0.5) / grid;
    for (int j = 0; j < grid; ++j) {
      const double accel = b.accel_min + (b.accel_max - b.accel_min) * (j + 0.5) / grid;
      const RawAction raw{raw_for(steer, b.steer_min, b.steer_max), raw_for(accel, b.accel_min, b.accel_max)};
      const SampleCost c = rollout_actions(start, std::span<const RawAction>(&raw, 1), model, rho);
      best = std::min(best, c.track + rho * c.safe);
    }
  }
  return best;
}

}  // namespace

TEST_CASE("single step oracle is no worse than a dense action grid") {
  const RolloutModel model = make_model(1);
  std::mt19937_64 rng(21);
  mpc::SolveOptions opt;
  for (int k = 0; k < 8; ++k) {
    const RolloutStart start = random_case(model, rng, static_cast<world::Task>(k % 3));
    const mpc::OcpSolution sol = mpc::solve_ocp(start, model, opt);
    const double grid = grid_best(start, model, opt.rho, 100);
    CHECK(sol.total <= grid + 1e-6);
    // The lattice is fine enough that it cannot be far above the optimum either.
    CHECK(sol.total >= grid - 0.05 * (1.0 + grid));
  }
}

TEST_CASE("oracle beats random feasible sequences") {
  const RolloutModel model = make_model(10);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  mpc::SolveOptions opt;
  opt.rho = 10.0;
  for (int k = 0; k < 3; ++k) {
    const RolloutStart start = random_case(model, rng, world::Task::kLeft);
    const mpc::OcpSolution sol = mpc::solve_ocp(start, model, opt);
    CHECK(std::isfinite(sol.total));
    CHECK(sol.total == doctest::Approx(sol.track + opt.rho * sol.safe).epsilon(1e-12));
    for (int r = 0; r < 100; ++r) {
      std::vector<RawAction> raw(10);
      for (RawAction& a : raw) a = {n01(rng), n01(rng)};
      const SampleCost c = rollout_actions(start, raw, model, opt.rho);
      CHECK(sol.total <= c.track + opt.rho * c.safe + 1e-9);
    }
  }
}

TEST_CASE("descent never increases the cost") {
  const RolloutModel model = make_model(25);
  std::mt19937_64 rng(4);
  const RolloutStart start = random_case(model, rng, world::Task::kStraight);
  std::vector<RawAction> zero(25, RawAction{0.0, 0.0});
  const SampleCost c0 = rollout_actions(start, zero, model, 1e4);
  double previous = c0.track + 1e4 * c0.safe;
  for (int budget : {1, 2, 5, 20, 80}) {
    const mpc::OcpSolution s = mpc::descend(start, model, 1e4, zero, budget, 0.0);
    CHECK(s.total <= previous + 1e-9);
    CHECK(s.iterations <= budget);
    previous = s.total;
  }
}

TEST_CASE("on path at reference speed the optimum beats the zero sequence") {
  const RolloutModel model = make_model(25);
  const RolloutStart start = make_start(model, world::Task::kRight, 1, 20, 8.0, 3.0, {});
  const std::vector<RawAction> zero(25, RawAction{0.0, 0.0});
  const SampleCost c0 = rollout_actions(start, zero, model, 1.0);
  const mpc::OcpSolution sol = mpc::solve_ocp(start, model, mpc::SolveOptions{});
  CHECK(sol.track < c0.track);
  CHECK(sol.safe == 0.0);
}

TEST_CASE("warm start is never lost") {
  const RolloutModel model = make_model(5);
  std::mt19937_64 rng(30);
  const RolloutStart start = random_case(model, rng, world::Task::kRight);
  mpc::SolveOptions opt;
  opt.budget = 1;
  opt.random_starts = 0;
  const mpc::OcpSolution cold = mpc::solve_ocp(start, model, opt);
  opt.budget = 300;
  const mpc::OcpSolution good = mpc::solve_ocp(start, model, opt);
  opt.budget = 1;
  const mpc::OcpSolution warmed = mpc::solve_ocp(start, model, opt, &good.raw);
  CHECK(warmed.total <= good.total + 1e-12);
  CHECK(warmed.total <= cold.total + 1e-12);
}

TEST_CASE("comparison rows are finite and the oracle is no worse than the policy start") {
  const RolloutModel model = make_model(8);
  std::mt19937_64 rng(2);
  std::vector<RolloutStart> cases;
  for (int k = 0; k < 3; ++k) cases.push_back(random_case(model, rng, world::Task::kRight));
  const Networks nets = tiny_nets(Representation::kDynamic, 6);
  mpc::SolveOptions opt;
  opt.budget = 50;
  const auto rows = mpc::compare_policy_mpc(nets, cases, model, opt);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.j_policy));
    CHECK(std::isfinite(r.j_mpc));
    CHECK(r.j_mpc <= r.j_policy + 1e-9);
    CHECK(r.d_steer >= 0.0);
    CHECK(r.t_policy_ms >= 0.0);
  }
}
