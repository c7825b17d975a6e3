#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "nn/adam.hpp"
#include "trainer/buffer.hpp"
#include "trainer/checkpoint.hpp"
#include "trainer/networks.hpp"
#include "trainer/rollout.hpp"
#include "trainer/sampler.hpp"

namespace eidc::trainer {

struct PenaltySchedule {
  double amplifier = 1.1;
  int interval = 100;
  double max = 1e4;

  // min(amplifier^floor(k / interval), max)
  double rho(std::int64_t k) const;
};

struct LearningRates {
  double policy_start = 3e-4;
  double policy_end = 1e-5;
  double value_start = 3e-4;
  double value_end = 1e-5;
  double encoder_start = 8e-4;
  double encoder_end = 1e-5;
};

struct TrainConfig {
  NetworkShape shape;
  std::int64_t iterations = 200000;
  int batch = 256;
  int env_steps = 10;        // environment steps per sampler per iteration
  int warmup_samples = 1000;
  std::size_t buffer_capacity = 500000;
  bool store_states = false;  // value input taken from the state stored at sampling time
  int samplers = 1;
  int learners = 1;
  int log_interval = 1;
  int checkpoint_interval = 1000;
  PenaltySchedule penalty;
  LearningRates lr;
};

struct TrainSetup {
  TrainConfig train;
  SamplerConfig sampler;
  RolloutModel model;  // map is filled in by the trainer
  world::LightConfig lights;
};

// Random weights with the policy output centred on the zero action.
Networks initial_networks(const NetworkShape& shape, const vehicle::ActionBounds& bounds, std::uint64_t seed);

struct Metrics {
  std::int64_t iteration = 0;
  double j_pi = 0.0;
  double j_track = 0.0;
  double j_safe = 0.0;
  double j_value = 0.0;
  double rho = 1.0;
  double lr = 0.0;
  bool skipped = false;  // some update was rejected for a non-finite gradient
};

// mean_b (V(s_b) - target_b)^2; with `grad`, accumulates its gradient w.r.t. w.
double value_loss(const nn::MlpParams& value, const nn::Matrix& states, std::span<const double> targets,
                  nn::MlpGradient* grad = nullptr);

class Trainer {
 public:
  Trainer(const world::IntersectionMap& map, const TrainSetup& setup, std::uint64_t seed);
  Trainer(const world::IntersectionMap& map, const TrainSetup& setup, std::uint64_t seed, Networks initial);

  // One sampling phase followed by value, encoder and policy updates.
  Metrics iterate();

  const Networks& networks() const { return nets_; }
  std::int64_t iteration() const { return iteration_; }
  double rho() const { return setup_.train.penalty.rho(iteration_); }
  Checkpoint checkpoint() const { return {nets_, iteration_, seed_, rho()}; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const RolloutModel& model() const { return model_; }

 private:
  void sample(int steps);

  TrainSetup setup_;
  RolloutModel model_;
  std::uint64_t seed_;
  Networks nets_;
  nn::AdamState adam_encoder_;
  nn::AdamState adam_policy_;
  nn::AdamState adam_value_;
  ReplayBuffer buffer_;
  std::vector<std::unique_ptr<Sampler>> samplers_;
  std::mt19937_64 rng_;
  std::int64_t iteration_ = 0;
};

struct TrainResult {
  std::int64_t iterations = 0;
  bool interrupted = false;
  std::filesystem::path last_checkpoint;
};

// Runs the trainer to setup.train.iterations, writing metrics.csv and
// checkpoints/iter_NNNNNNN under `out_dir`. On NumericError the current
// parameters are checkpointed before the error is rethrown. When `stop`
// becomes true the loop checkpoints and returns early.
TrainResult train(const world::IntersectionMap& map, const TrainSetup& setup, std::uint64_t seed,
                  const std::filesystem::path& out_dir, const std::atomic<bool>* stop = nullptr);

}  // namespace eidc::trainer
