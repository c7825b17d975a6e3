#include "mpc/oracle.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "common/error.hpp"
#include "trainer/sampler.hpp"

namespace eidc::mpc {
namespace {

double objective(const trainer::RolloutStart& start, std::span<const RawAction> raw,
                 const trainer::RolloutModel& model, double rho, std::vector<RawAction>* grad, double* track,
                 double* safe) {
  const trainer::SampleCost c = trainer::rollout_actions(start, raw, model, rho, grad);
  if (track != nullptr) *track = c.track;
  if (safe != nullptr) *safe = c.safe;
  return c.track + rho * c.safe;
}

double dot(const std::vector<RawAction>& a, const std::vector<RawAction>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i][0] * b[i][0] + a[i][1] * b[i][1];
  return s;
}

double inf_norm(const std::vector<RawAction>& a) {
  double m = 0.0;
  for (const RawAction& v : a) m = std::max({m, std::abs(v[0]), std::abs(v[1])});
  return m;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

OcpSolution descend(const trainer::RolloutStart& start, const trainer::RolloutModel& model, double rho,
                    std::vector<RawAction> x, int budget, double tolerance) {
  if (budget <= 0) throw ConfigError("solver budget must be positive");
  if (static_cast<int>(x.size()) != model.horizon) throw UsageError("initial sequence length must equal the horizon");
  OcpSolution sol;
  std::vector<RawAction> g, x_new, g_new;
  double f = objective(start, x, model, rho, &g, nullptr, nullptr);
  // Barzilai-Borwein guess for the first trial step, then halving until the
  // Armijo condition holds.
  double step = 1.0 / std::max(1.0, inf_norm(g));
  int it = 0;
  for (; it < budget; ++it) {
    if (inf_norm(g) < tolerance) {
      sol.converged = true;
      break;
    }
    const double gg = dot(g, g);
    double t = step;
    double f_new = 0.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      x_new = x;
      for (std::size_t i = 0; i < x.size(); ++i) {
        x_new[i][0] -= t * g[i][0];
        x_new[i][1] -= t * g[i][1];
      }
      f_new = objective(start, x_new, model, rho, nullptr, nullptr, nullptr);
      if (std::isfinite(f_new) && f_new <= f - 1e-4 * t * gg) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    objective(start, x_new, model, rho, &g_new, nullptr, nullptr);
    std::vector<RawAction> s(x.size()), y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (int j = 0; j < 2; ++j) {
        s[i][j] = x_new[i][j] - x[i][j];
        y[i][j] = g_new[i][j] - g[i][j];
      }
    }
    const double sy = dot(s, y);
    step = sy > 0.0 ? std::clamp(dot(s, s) / sy, 1e-8, 1e3) : 2.0 * t;
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
  }
  sol.iterations = it;
  sol.total = objective(start, x, model, rho, nullptr, &sol.track, &sol.safe);
  sol.raw = std::move(x);
  return sol;
}

OcpSolution solve_ocp(const trainer::RolloutStart& start, const trainer::RolloutModel& model, const SolveOptions& opt,
                      const std::vector<RawAction>* warm_start) {
  if (model.horizon < 1) throw ConfigError("solver horizon must be at least 1");
  const std::size_t T = static_cast<std::size_t>(model.horizon);
  std::vector<std::vector<RawAction>> inits;
  inits.emplace_back(T, RawAction{0.0, 0.0});
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> n01(0.0, opt.raw_sigma);
  for (int r = 0; r < opt.random_starts; ++r) {
    std::vector<RawAction> x(T);
    for (auto& a : x) a = {n01(rng), n01(rng)};
    inits.push_back(std::move(x));
  }
  if (warm_start != nullptr) inits.push_back(*warm_start);
  OcpSolution best;
  bool have = false;
  int iterations = 0;
  for (auto& x0 : inits) {
    OcpSolution s = descend(start, model, opt.rho, std::move(x0), opt.budget, opt.tolerance);
    iterations += s.iterations;
    if (!have || s.total < best.total) {
      best = std::move(s);
      have = true;
    }
  }
  best.iterations = iterations;
  return best;
}

std::vector<Comparison> compare_policy_mpc(const trainer::Networks& nets, std::span<const trainer::RolloutStart> cases,
                                           const trainer::RolloutModel& model, const SolveOptions& opt) {
  std::vector<Comparison> out;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const trainer::RolloutStart& start = cases[c];
    Comparison row;
    row.case_id = static_cast<int>(c);

    auto t0 = std::chrono::steady_clock::now();
    const vehicle::Action u_policy = trainer::policy_action(nets, start.obs, model.bounds);
    row.t_policy_ms = ms_since(t0);

    trainer::RolloutTrace trace;
    const trainer::RolloutResult r = trainer::rollout_policy(nets, std::span(&start, 1), model, opt.rho, nullptr, &trace);
    row.j_policy = r.mean_total;
    std::vector<RawAction> policy_raw;
    for (const auto& step : trace.raw) policy_raw.push_back(step[0]);

    SolveOptions o = opt;
    o.seed = opt.seed + c;
    t0 = std::chrono::steady_clock::now();
    const OcpSolution sol = solve_ocp(start, model, o, &policy_raw);
    row.t_mpc_ms = ms_since(t0);
    row.j_mpc = sol.total;
    const vehicle::Action u_mpc = vehicle::squash_action(sol.raw[0], model.bounds);
    row.d_steer = std::abs(u_policy.steer - u_mpc.steer);
    row.d_accel = std::abs(u_policy.accel - u_mpc.accel);
    out.push_back(row);
  }
  return out;
}

std::vector<trainer::RolloutStart> held_cases(const world::IntersectionMap& map, const trainer::TrainSetup& setup,
                                              const trainer::Networks& nets, int count, std::uint64_t seed,
                                              int stride) {
  if (count < 0 || stride < 1) throw UsageError("held_cases needs count >= 0 and stride >= 1");
  std::vector<trainer::RolloutStart> cases;
  if (count == 0) return cases;
  trainer::RolloutModel model = setup.model;
  model.map = &map;
  trainer::Sampler sampler(map, world::LightSystem(setup.lights), setup.sampler, model, seed);
  std::mt19937_64 rng(seed ^ 0x5eedca5eULL);
  std::uniform_int_distribution<int> path(0, 2);
  while (static_cast<int>(cases.size()) < count) {
    const std::vector<trainer::Experience> run = sampler.collect(nets, stride);
    const trainer::Experience& e = run.back();
    cases.push_back({e.obs, e.light_clock, e.u_prev, e.task, path(rng)});
  }
  return cases;
}

}  // namespace eidc::mpc
