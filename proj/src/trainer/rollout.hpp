#pragma once

#include <array>
#include <span>
#include <vector>

#include "encoding/observation.hpp"
#include "objective/objective.hpp"
#include "trainer/networks.hpp"
#include "vehicle/bicycle.hpp"
#include "world/lights.hpp"
#include "world/map.hpp"

namespace eidc::trainer {

using RawAction = std::array<double, 2>;

// Constants of the prediction model and the cost.
struct RolloutModel {
  const world::IntersectionMap* map = nullptr;
  world::LightSystem lights;  // offset is ignored; phases come from the start clock
  vehicle::BicycleParams bicycle;
  vehicle::ActionBounds bounds;
  objective::UtilityWeights weights;
  objective::SafetyParams safety;
  double dt = 0.1;
  int horizon = 25;

  const world::ReferencePath& path(world::Task task, int index) const;
  int phase_at(double clock) const;
  objective::StopLineRule stop_rule(world::Task task, double clock) const;
};

// Start of one rollout. The ego state is read from obs.x_else.
struct RolloutStart {
  Observation obs;
  double light_clock = 0.0;
  vehicle::Action u_prev;
  world::Task task = world::Task::kRight;
  int path = 0;
};

// Participant in absolute coordinates, moving at constant velocity.
struct Mover {
  double x = 0.0;
  double y = 0.0;
  double speed = 0.0;
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;
  ParticipantKind kind = ParticipantKind::kVehicle;
};

struct PredictionState {
  vehicle::EgoState ego;
  std::vector<Mover> movers;
  double light_clock = 0.0;
  vehicle::Action u_prev;
};

vehicle::EgoState ego_from_x_else(const std::array<double, kElseDim>& x_else);
PredictionState prediction_state(const RolloutStart& start);
// One step of the prediction model: ego by the bicycle model, participants
// at constant velocity, light clock by dt.
PredictionState predict_step(const PredictionState& state, const vehicle::Action& action, const RolloutModel& model);
Observation observe(const PredictionState& state, const world::ReferencePath& path, const RolloutModel& model);

struct SampleCost {
  double track = 0.0;
  double safe = 0.0;
};

struct RolloutResult {
  std::vector<SampleCost> costs;
  double mean_track = 0.0;
  double mean_safe = 0.0;
  double mean_total = 0.0;
  nn::Matrix initial_states;          // s_0 per sample
  std::vector<RawAction> first_raw;   // policy output at step 0
};

struct RolloutTrace {
  std::vector<std::vector<PredictionState>> states;  // [step][sample], horizon + 1 entries
  std::vector<std::vector<RawAction>> raw;           // [step][sample]
  std::vector<nn::MlpGradient> encoder_by_step;      // filled only when gradients are requested
};

// Closed-loop rollout of pi(U(O)) over the batch. With `grads`, accumulates
// d/d(encoder, policy) of mean_b(J_track + rho J_safe).
RolloutResult rollout_policy(const Networks& nets, std::span<const RolloutStart> batch, const RolloutModel& model,
                             double rho, NetworkGradients* grads = nullptr, RolloutTrace* trace = nullptr);

// Open-loop rollout of a raw action sequence of length model.horizon. With
// `raw_grad`, writes d(J_track + rho J_safe)/d(raw).
SampleCost rollout_actions(const RolloutStart& start, std::span<const RawAction> raw, const RolloutModel& model,
                           double rho, std::vector<RawAction>* raw_grad = nullptr);

// Encoded states of one observation against each candidate path of its task.
nn::Matrix candidate_states(const Networks& nets, const Observation& obs, world::Task task,
                            const RolloutModel& model);
nn::Vector encode_state(const Networks& nets, const Observation& obs);

}  // namespace eidc::trainer
