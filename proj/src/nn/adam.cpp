#include "nn/adam.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "common/error.hpp"

namespace eidc::nn {

AdamState AdamState::for_size(std::size_t n) {
  AdamState s;
  s.first_moment.assign(n, 0.0);
  s.second_moment.assign(n, 0.0);
  return s;
}

bool adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw UsageError("adam_step: parameter, gradient and moment sizes differ");
  }
  if (!std::all_of(grads.begin(), grads.end(), [](double g) { return std::isfinite(g); })) return false;

  const std::int64_t t = state.step_count + 1;
  const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
  state.step_count = t;
  return true;
}

double cosine_lr(std::int64_t iter, std::int64_t total, double lr_start, double lr_end) {
  if (total <= 0) throw UsageError("cosine_lr: total iterations must be positive");
  if (iter >= total) return lr_end;
  if (iter <= 0) return lr_start;
  const double progress = static_cast<double>(iter) / static_cast<double>(total);
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace eidc::nn
