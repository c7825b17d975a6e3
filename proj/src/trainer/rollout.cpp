#include "trainer/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "common/error.hpp"
#include "world/world.hpp"

namespace eidc::trainer {
namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;

void advance_movers(std::vector<Mover>& movers, double dt) {
  for (Mover& m : movers) {
    m.x += dt * m.speed * std::cos(m.heading);
    m.y += dt * m.speed * std::sin(m.heading);
  }
}

std::vector<objective::Body> bodies_of(const std::vector<Mover>& movers) {
  std::vector<objective::Body> out;
  out.reserve(movers.size());
  for (const Mover& m : movers) out.push_back({{m.x, m.y, m.heading, m.length, m.width}, m.kind});
  return out;
}

objective::Pose pose_of(const vehicle::EgoState& e) { return {e.x, e.y, e.heading, e.length, e.width}; }

ParticipantFeature relative_feature(const Mover& m, const vehicle::EgoState& e) {
  return {m.x - e.x, m.y - e.y, m.speed, m.heading, m.length, m.width, m.kind};
}

// Adds the adjoint of x_else entries that depend on the ego state.
void x_else_to_ego(const double* xe_bar, double ref_heading, Vec6& e) {
  e[0] += xe_bar[xe::kEgoX];
  e[1] += xe_bar[xe::kEgoY];
  e[2] += xe_bar[xe::kVx];
  e[3] += xe_bar[xe::kVy];
  e[4] += xe_bar[xe::kHeading];
  e[5] += xe_bar[xe::kYawRate];
  e[0] -= std::sin(ref_heading) * xe_bar[xe::kDistanceError];
  e[1] += std::cos(ref_heading) * xe_bar[xe::kDistanceError];
  e[2] += xe_bar[xe::kSpeedError];
  e[4] += xe_bar[xe::kHeadingError];
}

struct StepRecord {
  vehicle::StepJacobian jac;
  double ref_heading = 0.0;
  objective::UtilityGradient utility;
  objective::PoseGradient penalty;
  std::array<double, 2> squash_slope{};
  std::array<int, kFpSlots> fp_slots{};
  Eigen::Index first_row = 0;
  Eigen::Index rows = 0;
};

void check_finite(double value, int step, const char* term) {
  if (!std::isfinite(value)) {
    throw NumericError("rollout step " + std::to_string(step) + ": non-finite " + term);
  }
}

struct Core {
  const RolloutModel& model;
  double rho;
  std::size_t batch;
  std::vector<PredictionState> state;
  std::vector<const world::ReferencePath*> paths;
  std::vector<world::Task> tasks;
  std::vector<std::vector<StepRecord>> records;  // [step][sample]
  std::vector<SampleCost> costs;

  Core(const RolloutModel& m, std::span<const RolloutStart> starts, double r)
      : model(m), rho(r), batch(starts.size()) {
    if (m.map == nullptr) throw UsageError("rollout model has no map");
    if (m.horizon < 1) throw ConfigError("rollout horizon must be at least 1");
    for (const RolloutStart& s : starts) {
      state.push_back(prediction_state(s));
      paths.push_back(&m.path(s.task, s.path));
      tasks.push_back(s.task);
    }
    records.assign(static_cast<std::size_t>(m.horizon), std::vector<StepRecord>(batch));
    costs.assign(batch, {});
  }

  // Cost terms of step i and the ego/participant advance.
  void apply(int i, std::size_t b, const RawAction& raw) {
    StepRecord& rec = records[i][b];
    PredictionState& st = state[b];
    const vehicle::Action u = vehicle::squash_action(raw, model.bounds);
    rec.squash_slope = vehicle::squash_derivative(raw, model.bounds);
    const world::TrackingQuery q = world::track(*paths[b], st.ego.x, st.ego.y, st.ego.vx, st.ego.heading);
    rec.ref_heading = paths[b]->points()[q.index].heading;
    const double l = objective::utility(q.error, st.ego.yaw_rate, u, st.u_prev, model.dt, model.weights, &rec.utility);
    const std::vector<objective::Body> others = bodies_of(st.movers);
    const double phi = objective::pose_penalty(pose_of(st.ego), others, model.stop_rule(tasks[b], st.light_clock),
                                               model.safety, &rec.penalty);
    check_finite(l, i, "tracking utility");
    check_finite(phi, i, "safety penalty");
    costs[b].track += l;
    costs[b].safe += phi;
    st.ego = vehicle::step_bicycle(st.ego, u, model.dt, model.bicycle, &rec.jac);
    advance_movers(st.movers, model.dt);
    st.light_clock += model.dt;
    st.u_prev = u;
  }

  // Ego and action adjoints of step i from its own costs and the future.
  // Returns the action adjoint before the squash; `ego_bar` becomes the
  // adjoint of the ego state at step i (network terms added by the caller).
  RawAction backward_step(int i, std::size_t b, double weight, Vec6& ego_bar, std::array<double, 2>& uprev_bar) {
    const StepRecord& rec = records[i][b];
    Eigen::Vector2d ub;
    ub << weight * rec.utility.action[0] + uprev_bar[0], weight * rec.utility.action[1] + uprev_bar[1];
    ub.noalias() += rec.jac.action.transpose() * ego_bar;
    Vec6 e = rec.jac.state.transpose() * ego_bar;
    const double w_track = weight;
    e[0] -= w_track * std::sin(rec.ref_heading) * rec.utility.distance;
    e[1] += w_track * std::cos(rec.ref_heading) * rec.utility.distance;
    e[2] += w_track * rec.utility.speed;
    e[4] += w_track * rec.utility.heading;
    e[5] += w_track * rec.utility.yaw_rate;
    e[0] += weight * rho * rec.penalty.x;
    e[1] += weight * rho * rec.penalty.y;
    e[4] += weight * rho * rec.penalty.heading;
    ego_bar = e;
    uprev_bar = {weight * rec.utility.previous_action[0], weight * rec.utility.previous_action[1]};
    return {ub[0] * rec.squash_slope[0], ub[1] * rec.squash_slope[1]};
  }
};

}  // namespace

const world::ReferencePath& RolloutModel::path(world::Task task, int index) const {
  if (index < 0 || index > 2) throw UsageError("candidate path index out of range");
  return map->candidates(task)[static_cast<std::size_t>(index)];
}

int RolloutModel::phase_at(double clock) const {
  return lights.phase_at(clock - lights.clock(0.0));
}

objective::StopLineRule RolloutModel::stop_rule(world::Task task, double clock) const {
  objective::StopLineRule rule;
  rule.line = map->ego_stop_line(task);
  rule.red = task != world::Task::kRight &&
             !world::LightSystem::movement_green(phase_at(clock), world::kSouth, task);
  return rule;
}

vehicle::EgoState ego_from_x_else(const std::array<double, kElseDim>& x) {
  vehicle::EgoState e;
  e.x = x[xe::kEgoX];
  e.y = x[xe::kEgoY];
  e.vx = x[xe::kVx];
  e.vy = x[xe::kVy];
  e.heading = x[xe::kHeading];
  e.yaw_rate = x[xe::kYawRate];
  e.length = x[xe::kLength];
  e.width = x[xe::kWidth];
  return e;
}

PredictionState prediction_state(const RolloutStart& start) {
  PredictionState st;
  st.ego = ego_from_x_else(start.obs.x_else);
  st.light_clock = start.light_clock;
  st.u_prev = start.u_prev;
  for (const ParticipantFeature& f : truncate_to_caps(start.obs).canonical_participants()) {
    st.movers.push_back({st.ego.x + f.rel_x, st.ego.y + f.rel_y, f.speed, f.heading, f.length, f.width, f.kind});
  }
  return st;
}

PredictionState predict_step(const PredictionState& s, const vehicle::Action& action, const RolloutModel& model) {
  PredictionState n = s;
  n.ego = vehicle::step_bicycle(s.ego, action, model.dt, model.bicycle);
  advance_movers(n.movers, model.dt);
  n.light_clock += model.dt;
  n.u_prev = action;
  return n;
}

Observation observe(const PredictionState& s, const world::ReferencePath& path, const RolloutModel& model) {
  Observation obs;
  for (const Mover& m : s.movers) {
    const ParticipantFeature f = relative_feature(m, s.ego);
    switch (m.kind) {
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
  obs.x_else = world::make_x_else(s.ego, model.phase_at(s.light_clock), path);
  return obs;
}

RolloutResult rollout_policy(const Networks& nets, std::span<const RolloutStart> starts, const RolloutModel& model,
                             double rho, NetworkGradients* grads, RolloutTrace* trace) {
  Core core(model, starts, rho);
  const std::size_t B = starts.size();
  const int T = model.horizon;
  const bool dynamic = nets.representation == Representation::kDynamic;
  const int d3 = dynamic ? nets.encoder.output_width() : kFpSlots * kFeatureDim;
  const int sd = nets.state_dim();
  const bool record = grads != nullptr;
  std::vector<SetPoolTape> set_tapes(record && dynamic ? T : 0);
  std::vector<nn::MlpTape> policy_tapes(record ? T : 0);

  RolloutResult result;
  nn::Matrix S(static_cast<Eigen::Index>(B), sd);
  if (trace != nullptr) *trace = RolloutTrace();
  for (int i = 0; i < T; ++i) {
    if (trace != nullptr) trace->states.push_back(core.state);
    std::vector<std::array<double, kElseDim>> xes(B);
    for (std::size_t b = 0; b < B; ++b) {
      const PredictionState& st = core.state[b];
      xes[b] = world::make_x_else(st.ego, model.phase_at(st.light_clock), *core.paths[b]);
      for (int k = 0; k < kElseDim; ++k) S(static_cast<Eigen::Index>(b), d3 + k) = xes[b][k];
    }
    if (dynamic) {
      std::vector<Eigen::Index> offsets{0};
      for (std::size_t b = 0; b < B; ++b) offsets.push_back(offsets.back() + core.state[b].movers.size());
      nn::Matrix F(offsets.back(), kFeatureDim);
      for (std::size_t b = 0; b < B; ++b) {
        const PredictionState& st = core.state[b];
        core.records[i][b].first_row = offsets[b];
        core.records[i][b].rows = offsets[b + 1] - offsets[b];
        for (std::size_t j = 0; j < st.movers.size(); ++j) {
          const auto f = relative_feature(st.movers[j], st.ego).as_array();
          for (int c = 0; c < kFeatureDim; ++c) F(offsets[b] + static_cast<Eigen::Index>(j), c) = f[c];
        }
      }
      S.leftCols(d3) = pool_sets(nets.encoder, F, offsets, record ? &set_tapes[i] : nullptr);
    } else {
      for (std::size_t b = 0; b < B; ++b) {
        Observation o = observe(core.state[b], *core.paths[b], model);
        const auto slots = fp_slot_sources(o);
        core.records[i][b].fp_slots = slots;
        S.row(static_cast<Eigen::Index>(b)) = encode_fp(o).transpose();
      }
    }
    const nn::Matrix R = nn::forward(nets.policy, S, record ? &policy_tapes[i] : nullptr);
    if (i == 0) {
      result.initial_states = S;
      for (std::size_t b = 0; b < B; ++b) result.first_raw.push_back({R(b, 0), R(b, 1)});
    }
    if (trace != nullptr) {
      trace->raw.emplace_back(B);
      for (std::size_t b = 0; b < B; ++b) trace->raw.back()[b] = {R(b, 0), R(b, 1)};
    }
    for (std::size_t b = 0; b < B; ++b) {
      check_finite(R(b, 0) + R(b, 1), i, "policy output");
      core.apply(i, b, {R(b, 0), R(b, 1)});
    }
  }

  if (trace != nullptr) trace->states.push_back(core.state);
  result.costs = core.costs;
  for (const SampleCost& c : core.costs) {
    result.mean_track += c.track;
    result.mean_safe += c.safe;
  }
  result.mean_track /= static_cast<double>(B);
  result.mean_safe /= static_cast<double>(B);
  result.mean_total = result.mean_track + rho * result.mean_safe;
  if (!record) return result;

  const double weight = 1.0 / static_cast<double>(B);
  std::vector<Vec6> ego_bar(B, Vec6::Zero());
  std::vector<std::array<double, 2>> uprev_bar(B, {0.0, 0.0});
  nn::Matrix Rbar(static_cast<Eigen::Index>(B), 2);
  for (int i = T - 1; i >= 0; --i) {
    for (std::size_t b = 0; b < B; ++b) {
      const RawAction rb = core.backward_step(i, b, weight, ego_bar[b], uprev_bar[b]);
      Rbar(b, 0) = rb[0];
      Rbar(b, 1) = rb[1];
    }
    const nn::Matrix Sbar = nn::backward(policy_tapes[i], Rbar, grads->policy);
    for (std::size_t b = 0; b < B; ++b) {
      const StepRecord& rec = core.records[i][b];
      x_else_to_ego(Sbar.row(b).data() + d3, rec.ref_heading, ego_bar[b]);
      if (!dynamic) {
        for (int s = 0; s < kFpSlots; ++s) {
          if (rec.fp_slots[s] < 0) continue;
          ego_bar[b][0] -= Sbar(b, s * kFeatureDim);
          ego_bar[b][1] -= Sbar(b, s * kFeatureDim + 1);
        }
      }
    }
    if (dynamic) {
      nn::Matrix Fbar;
      if (trace != nullptr) {
        nn::MlpGradient step = nn::MlpGradient::zeros_like(nets.encoder);
        Fbar = pool_sets_backward(set_tapes[i], Sbar.leftCols(d3), step);
        grads->encoder += step;
        trace->encoder_by_step.push_back(std::move(step));
      } else {
        Fbar = pool_sets_backward(set_tapes[i], Sbar.leftCols(d3), grads->encoder);
      }
      for (std::size_t b = 0; b < B; ++b) {
        const StepRecord& rec = core.records[i][b];
        for (Eigen::Index r = rec.first_row; r < rec.first_row + rec.rows; ++r) {
          ego_bar[b][0] -= Fbar(r, 0);
          ego_bar[b][1] -= Fbar(r, 1);
        }
      }
    }
  }
  if (trace != nullptr) std::reverse(trace->encoder_by_step.begin(), trace->encoder_by_step.end());
  return result;
}

SampleCost rollout_actions(const RolloutStart& start, std::span<const RawAction> raw, const RolloutModel& model,
                           double rho, std::vector<RawAction>* raw_grad) {
  if (static_cast<int>(raw.size()) != model.horizon) throw UsageError("action sequence length must equal the horizon");
  Core core(model, std::span<const RolloutStart>(&start, 1), rho);
  for (int i = 0; i < model.horizon; ++i) {
    check_finite(raw[i][0] + raw[i][1], i, "action");
    core.apply(i, 0, raw[i]);
  }
  if (raw_grad != nullptr) {
    raw_grad->assign(raw.size(), {0.0, 0.0});
    Vec6 ego_bar = Vec6::Zero();
    std::array<double, 2> uprev_bar{0.0, 0.0};
    for (int i = model.horizon - 1; i >= 0; --i) (*raw_grad)[i] = core.backward_step(i, 0, 1.0, ego_bar, uprev_bar);
  }
  return core.costs[0];
}

nn::Vector encode_state(const Networks& nets, const Observation& obs) {
  if (nets.representation == Representation::kDynamic) return encode_dp(obs, nets.encoder).values;
  return encode_fp(obs);
}

nn::Matrix candidate_states(const Networks& nets, const Observation& obs, world::Task task,
                            const RolloutModel& model) {
  const vehicle::EgoState ego = ego_from_x_else(obs.x_else);
  const int phase = static_cast<int>(obs.x_else[xe::kPhase]);
  nn::Matrix out(3, nets.state_dim());
  if (nets.representation == Representation::kDynamic) {
    const nn::Vector base = encode_dp(obs, nets.encoder).values;
    const int d3 = nets.encoder.output_width();
    for (int k = 0; k < 3; ++k) {
      out.row(k) = base.transpose();
      const auto xe = world::make_x_else(ego, phase, model.path(task, k));
      for (int c = 0; c < kElseDim; ++c) out(k, d3 + c) = xe[c];
    }
    return out;
  }
  for (int k = 0; k < 3; ++k) {
    Observation o = obs;
    o.x_else = world::make_x_else(ego, phase, model.path(task, k));
    out.row(k) = encode_fp(o).transpose();
  }
  return out;
}

}  // namespace eidc::trainer
