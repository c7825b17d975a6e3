#include "trainer/train.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "common/error.hpp"
#include "common/files.hpp"
#include "common/version.hpp"

namespace eidc::trainer {
namespace {

bool apply_adam(nn::MlpParams& params, const nn::MlpGradient& grad, nn::AdamState& state, double lr) {
  std::vector<double> flat = params.flatten();
  if (!nn::adam_step(flat, grad.flatten(), state, lr)) return false;
  params.assign_flat(flat);
  return true;
}

void scale(NetworkGradients& g, double f) {
  g.encoder *= f;
  g.policy *= f;
  g.value *= f;
}

std::string metrics_row(const Metrics& m) {
  return fmt::format("{},{},{},{},{},{},{}\n", m.iteration, m.j_pi, m.j_track, m.j_safe, m.j_value, m.rho, m.lr);
}

}  // namespace

double PenaltySchedule::rho(std::int64_t k) const {
  if (interval <= 0) throw ConfigError("penalty interval must be positive");
  return std::min(std::pow(amplifier, static_cast<double>(k / interval)), max);
}

double value_loss(const nn::MlpParams& value, const nn::Matrix& states, std::span<const double> targets,
                  nn::MlpGradient* grad) {
  if (static_cast<std::size_t>(states.rows()) != targets.size()) throw UsageError("one target per state row");
  nn::MlpTape tape;
  const nn::Matrix v = nn::forward(value, states, grad != nullptr ? &tape : nullptr);
  const double n = static_cast<double>(targets.size());
  nn::Matrix adjoint(v.rows(), 1);
  double loss = 0.0;
  for (Eigen::Index b = 0; b < v.rows(); ++b) {
    const double r = v(b, 0) - targets[b];
    loss += r * r;
    adjoint(b, 0) = 2.0 * r / n;
  }
  if (grad != nullptr) nn::backward(tape, adjoint, *grad);
  return loss / n;
}

Networks initial_networks(const NetworkShape& shape, const vehicle::ActionBounds& bounds, std::uint64_t seed) {
  Networks n = Networks::create(shape, seed);
  // Output biases that map to the zero action when it lies inside the bounds.
  const auto neutral = [](double lo, double hi) {
    const double t = std::clamp((0.0 - lo) / (hi - lo) * 2.0 - 1.0, -0.99, 0.99);
    return std::atanh(t);
  };
  auto& bias = n.policy.biases.back();
  bias[0] = neutral(bounds.steer_min, bounds.steer_max) / n.policy.output_scale;
  bias[1] = neutral(bounds.accel_min, bounds.accel_max) / n.policy.output_scale;
  return n;
}

Trainer::Trainer(const world::IntersectionMap& map, const TrainSetup& setup, std::uint64_t seed)
    : Trainer(map, setup, seed, initial_networks(setup.train.shape, setup.model.bounds, seed)) {}

Trainer::Trainer(const world::IntersectionMap& map, const TrainSetup& setup, std::uint64_t seed, Networks initial)
    : setup_(setup),
      model_(setup.model),
      seed_(seed),
      nets_(std::move(initial)),
      buffer_(setup.train.buffer_capacity),
      rng_(seed ^ 0xb0f5e1d5ULL) {
  const TrainConfig& t = setup.train;
  if (t.batch < 1 || t.iterations < 0 || t.env_steps < 0 || t.samplers < 1 || t.learners < 1 ||
      t.log_interval < 1 || t.checkpoint_interval < 1) {
    throw ConfigError("train: batch, samplers, learners and intervals must be positive");
  }
  nets_.validate();
  model_.map = &map;
  model_.lights = world::LightSystem(setup.lights);
  adam_encoder_ = nn::AdamState::for_size(nets_.encoder.parameter_count());
  adam_policy_ = nn::AdamState::for_size(nets_.policy.parameter_count());
  adam_value_ = nn::AdamState::for_size(nets_.value.parameter_count());
  for (int j = 0; j < t.samplers; ++j) {
    samplers_.push_back(std::make_unique<Sampler>(map, model_.lights, setup.sampler, model_,
                                                  seed + 1000003ULL * static_cast<std::uint64_t>(j + 1)));
  }
  const int per_sampler = (t.warmup_samples + t.samplers - 1) / t.samplers;
  sample(std::max(per_sampler, 1));
}

void Trainer::sample(int steps) {
  std::vector<std::vector<Experience>> got(samplers_.size());
  if (samplers_.size() == 1) {
    got[0] = samplers_[0]->collect(nets_, steps);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < samplers_.size(); ++j) {
      threads.emplace_back([&, j] { got[j] = samplers_[j]->collect(nets_, steps); });
    }
    for (auto& th : threads) th.join();
  }
  for (auto& chunk : got) {
    for (Experience& x : chunk) {
      if (setup_.train.store_states) x.state = encode_state(nets_, x.obs);
      buffer_.add(std::move(x));
    }
  }
}

Metrics Trainer::iterate() {
  const TrainConfig& t = setup_.train;
  Metrics m;
  m.iteration = iteration_;
  m.rho = rho();
  m.lr = nn::cosine_lr(iteration_, std::max<std::int64_t>(t.iterations, 1), t.lr.policy_start, t.lr.policy_end);

  sample(t.env_steps);

  const std::size_t B = static_cast<std::size_t>(t.batch);
  const std::vector<std::size_t> picks = buffer_.sample_indices(B, rng_);
  std::uniform_int_distribution<int> pick_path(0, 2);
  std::vector<RolloutStart> starts(B);
  nn::Matrix stored;
  if (t.store_states) stored.resize(static_cast<Eigen::Index>(B), nets_.state_dim());
  for (std::size_t b = 0; b < B; ++b) {
    Experience x = buffer_.at(picks[b]);
    if (t.store_states) stored.row(static_cast<Eigen::Index>(b)) = x.state.transpose();
    starts[b] = {std::move(x.obs), x.light_clock, x.u_prev, x.task, pick_path(rng_)};
  }

  // Learners take contiguous chunks; chunk gradients are batch means, so
  // they are reweighted by chunk size before summing in chunk order.
  const std::size_t L = std::min<std::size_t>(static_cast<std::size_t>(t.learners), B);
  std::vector<RolloutResult> results(L);
  std::vector<NetworkGradients> grads(L, NetworkGradients::zeros_like(nets_));
  std::vector<std::size_t> begin(L + 1);
  for (std::size_t l = 0; l <= L; ++l) begin[l] = B * l / L;
  auto run_chunk = [&](std::size_t l) {
    std::span<const RolloutStart> chunk(starts.data() + begin[l], begin[l + 1] - begin[l]);
    results[l] = rollout_policy(nets_, chunk, model_, m.rho, &grads[l]);
  };
  if (L == 1) {
    run_chunk(0);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(L);
    for (std::size_t l = 0; l < L; ++l) {
      threads.emplace_back([&, l] {
        try {
          run_chunk(l);
        } catch (...) {
          errors[l] = std::current_exception();
        }
      });
    }
    for (auto& th : threads) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  NetworkGradients total = NetworkGradients::zeros_like(nets_);
  nn::Matrix states(static_cast<Eigen::Index>(B), nets_.state_dim());
  std::vector<double> targets(B);
  for (std::size_t l = 0; l < L; ++l) {
    const double w = static_cast<double>(begin[l + 1] - begin[l]) / static_cast<double>(B);
    scale(grads[l], w);
    total += grads[l];
    m.j_track += w * results[l].mean_track;
    m.j_safe += w * results[l].mean_safe;
    for (std::size_t b = begin[l]; b < begin[l + 1]; ++b) {
      states.row(static_cast<Eigen::Index>(b)) = results[l].initial_states.row(static_cast<Eigen::Index>(b - begin[l]));
      targets[b] = results[l].costs[b - begin[l]].track;
    }
  }
  m.j_pi = m.j_track + m.rho * m.j_safe;
  m.j_value = value_loss(nets_.value, t.store_states ? stored : states, targets, &total.value);

  const auto lr = [&](double start, double end) {
    return nn::cosine_lr(iteration_, std::max<std::int64_t>(t.iterations, 1), start, end);
  };
  bool ok = apply_adam(nets_.value, total.value, adam_value_, lr(t.lr.value_start, t.lr.value_end));
  if (nets_.representation == Representation::kDynamic) {
    ok &= apply_adam(nets_.encoder, total.encoder, adam_encoder_, lr(t.lr.encoder_start, t.lr.encoder_end));
  }
  ok &= apply_adam(nets_.policy, total.policy, adam_policy_, m.lr);
  if (!ok) {
    m.skipped = true;
    spdlog::warn("iteration {}: non-finite gradient, update skipped", iteration_);
  }
  ++iteration_;
  return m;
}

TrainResult train(const world::IntersectionMap& map, const TrainSetup& setup, std::uint64_t seed,
                  const std::filesystem::path& out_dir, const std::atomic<bool>* stop) {
  std::filesystem::create_directories(out_dir / "checkpoints");
  Trainer trainer(map, setup, seed);
  TrainResult result;
  std::string csv = fmt::format("# eidc {} seed={}\niteration,j_pi,j_track,j_safe,j_value,rho,lr\n", kVersion, seed);
  const auto flush = [&] {
    const auto dir = out_dir / "checkpoints" / fmt::format("iter_{:07d}", trainer.iteration());
    save_checkpoint(dir, trainer.checkpoint());
    write_file_atomic(out_dir / "metrics.csv", csv);
    write_file_atomic(out_dir / "checkpoints" / "latest", dir.filename().string() + "\n");
    result.last_checkpoint = dir;
  };
  flush();
  const TrainConfig& t = setup.train;
  try {
    while (trainer.iteration() < t.iterations) {
      if (stop != nullptr && stop->load()) {
        result.interrupted = true;
        break;
      }
      const Metrics m = trainer.iterate();
      if (m.iteration % t.log_interval == 0) csv += metrics_row(m);
      if (trainer.iteration() % t.checkpoint_interval == 0 || trainer.iteration() == t.iterations) flush();
    }
  } catch (const NumericError& e) {
    spdlog::error("training aborted at iteration {}: {}", trainer.iteration(), e.what());
    flush();
    throw;
  }
  if (result.interrupted) flush();
  result.iterations = trainer.iteration();
  return result;
}

}  // namespace eidc::trainer
