#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace eidc::nn {

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_size(std::size_t n);
};

// One bias-corrected Adam update in place. Returns false and leaves both
// `params` and `state` untouched when any gradient entry is not finite.
// Throws UsageError on a shape mismatch.
bool adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr);

// lr_end + (lr_start - lr_end) * (1 + cos(pi * iter / total)) / 2, clamped to
// the [0, total] iteration range.
double cosine_lr(std::int64_t iter, std::int64_t total, double lr_start, double lr_end);

}  // namespace eidc::nn
