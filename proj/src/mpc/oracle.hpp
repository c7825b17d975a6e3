#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "trainer/networks.hpp"
#include "trainer/rollout.hpp"
#include "trainer/train.hpp"

namespace eidc::mpc {

using trainer::RawAction;

struct SolveOptions {
  double rho = 1e4;
  int budget = 400;       // gradient iterations per start
  int random_starts = 4;  // in addition to the zero sequence
  double raw_sigma = 1.0;
  double tolerance = 1e-6;  // on the gradient infinity norm
  std::uint64_t seed = 0;
};

struct OcpSolution {
  std::vector<RawAction> raw;
  double track = 0.0;
  double safe = 0.0;
  double total = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Minimizes J_track + rho J_safe over raw action sequences of length
// model.horizon. Starts from zeros, `random_starts` Gaussian sequences and
// `warm_start` when given; the best end point is returned.
OcpSolution solve_ocp(const trainer::RolloutStart& start, const trainer::RolloutModel& model, const SolveOptions& opt,
                      const std::vector<RawAction>* warm_start = nullptr);

// Gradient descent from one initial sequence with Armijo backtracking.
OcpSolution descend(const trainer::RolloutStart& start, const trainer::RolloutModel& model, double rho,
                    std::vector<RawAction> raw, int budget, double tolerance);

struct Comparison {
  int case_id = 0;
  double d_steer = 0.0;  // |policy - mpc| first action
  double d_accel = 0.0;
  double j_policy = 0.0;
  double j_mpc = 0.0;
  double t_policy_ms = 0.0;
  double t_mpc_ms = 0.0;
};

// Policy closed-loop rollout versus the oracle at the same rho. The policy's
// own action sequence is one of the oracle starts.
std::vector<Comparison> compare_policy_mpc(const trainer::Networks& nets, std::span<const trainer::RolloutStart> cases,
                                           const trainer::RolloutModel& model, const SolveOptions& opt);

// Observations met while driving `nets` in a sampler world, one every
// `stride` steps, each paired with a uniformly drawn candidate path.
std::vector<trainer::RolloutStart> held_cases(const world::IntersectionMap& map, const trainer::TrainSetup& setup,
                                              const trainer::Networks& nets, int count, std::uint64_t seed,
                                              int stride = 10);

}  // namespace eidc::mpc
