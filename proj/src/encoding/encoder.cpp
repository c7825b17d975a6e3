#include "encoding/encoder.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

#include "common/error.hpp"

namespace eidc {
namespace {

// Indices of the `cap` nearest entries, stable for equal distances, returned
// in stored order.
std::vector<std::size_t> nearest_in_order(const std::vector<ParticipantFeature>& set, std::size_t cap) {
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (set.size() <= cap) return idx;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return set[a].distance() < set[b].distance(); });
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<ParticipantFeature> truncate_set(const std::vector<ParticipantFeature>& set, int cap, const char* name) {
  if (static_cast<int>(set.size()) <= cap) return set;
  spdlog::debug("{} {} exceed cap {}; keeping the nearest", set.size(), name, cap);
  std::vector<ParticipantFeature> kept;
  for (std::size_t i : nearest_in_order(set, static_cast<std::size_t>(cap))) kept.push_back(set[i]);
  return kept;
}

// Stable by distance, so equal distances keep stored order.
std::vector<int> by_distance(const std::vector<ParticipantFeature>& set, int base) {
  std::vector<int> idx(set.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return set[a].distance() < set[b].distance(); });
  for (int& i : idx) i += base;
  return idx;
}

}  // namespace

Observation truncate_to_caps(const Observation& obs, const SetCaps& caps) {
  Observation out;
  out.vehicles = truncate_set(obs.vehicles, caps.vehicles, "vehicles");
  out.bicycles = truncate_set(obs.bicycles, caps.bicycles, "bicycles");
  out.pedestrians = truncate_set(obs.pedestrians, caps.pedestrians, "pedestrians");
  out.x_else = obs.x_else;
  return out;
}

void check_encoder_shape(const nn::MlpParams& encoder, const SetCaps& caps) {
  if (encoder.input_width() != kFeatureDim) {
    throw ConfigError("encoder input width must be " + std::to_string(kFeatureDim) + ", got " +
                      std::to_string(encoder.input_width()));
  }
  const int need = min_set_dim(caps.vehicles, caps.bicycles, caps.pedestrians, kFeatureDim);
  if (encoder.output_width() < need) {
    throw ConfigError("encoder output width " + std::to_string(encoder.output_width()) + " is below the minimum " +
                      std::to_string(need) + " for the configured set caps");
  }
  if (encoder.num_layers() < 2) throw ConfigError("encoder needs at least one hidden layer");
}

nn::Matrix pool_sets(const nn::MlpParams& encoder, const nn::Matrix& features,
                     const std::vector<Eigen::Index>& offsets, SetPoolTape* tape) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != features.rows()) {
    throw UsageError("set offsets do not cover the feature rows");
  }
  const Eigen::Index batch = static_cast<Eigen::Index>(offsets.size()) - 1;
  const nn::Matrix& w_last = encoder.weights.back();
  const nn::Vector& b_last = encoder.biases.back();

  nn::Matrix pooled = nn::Matrix::Zero(batch, w_last.cols());
  if (features.rows() > 0) {
    const nn::Matrix hidden = forward_hidden(encoder, features, tape != nullptr ? &tape->hidden_ : nullptr);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index r = offsets[b]; r < offsets[b + 1]; ++r) pooled.row(b) += hidden.row(r);
    }
  }
  nn::Matrix out(batch, w_last.rows());
  out.noalias() = pooled * w_last.transpose();
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double n = static_cast<double>(offsets[b + 1] - offsets[b]);
    out.row(b) += n * b_last.transpose();
  }
  if (encoder.output_scale != 1.0) out *= encoder.output_scale;

  if (tape != nullptr) {
    tape->encoder_ = &encoder;
    tape->pooled_ = std::move(pooled);
    tape->offsets_ = offsets;
    tape->consumed_ = false;
  }
  return out;
}

nn::Matrix pool_sets_backward(SetPoolTape& tape, const nn::Matrix& set_adjoint, nn::MlpGradient& grads) {
  if (!tape.recorded()) throw UsageError("pool_sets_backward called without a recorded forward pass");
  if (tape.consumed_) throw UsageError("pool_sets_backward called twice on the same tape");
  tape.consumed_ = true;
  const nn::MlpParams& encoder = *tape.encoder_;
  const std::size_t last = encoder.num_layers() - 1;
  const Eigen::Index batch = static_cast<Eigen::Index>(tape.offsets_.size()) - 1;
  if (set_adjoint.rows() != batch || set_adjoint.cols() != encoder.weights[last].rows()) {
    throw UsageError("set adjoint shape does not match the pooled forward pass");
  }

  nn::Matrix g = set_adjoint;
  if (encoder.output_scale != 1.0) g *= encoder.output_scale;
  grads.weights[last].noalias() += g.transpose() * tape.pooled_;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double n = static_cast<double>(tape.offsets_[b + 1] - tape.offsets_[b]);
    if (n > 0) grads.biases[last] += n * g.row(b).transpose();
  }

  const Eigen::Index rows = tape.offsets_.back();
  if (rows == 0) return nn::Matrix(0, kFeatureDim);
  const nn::Matrix per_sample = g * encoder.weights[last];
  nn::Matrix hidden_adjoint(rows, per_sample.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index r = tape.offsets_[b]; r < tape.offsets_[b + 1]; ++r) hidden_adjoint.row(r) = per_sample.row(b);
  }
  return backward(tape.hidden_, hidden_adjoint, grads);
}

nn::Matrix feature_rows(const Observation& obs) {
  const std::vector<ParticipantFeature> all = obs.canonical_participants();
  nn::Matrix rows(static_cast<Eigen::Index>(all.size()), kFeatureDim);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto f = all[i].as_array();
    for (int c = 0; c < kFeatureDim; ++c) rows(static_cast<Eigen::Index>(i), c) = f[c];
  }
  return rows;
}

DrivingState encode_dp(const Observation& obs, const nn::MlpParams& encoder) {
  check_encoder_shape(encoder);
  const Observation kept = truncate_to_caps(obs);
  const nn::Matrix rows = feature_rows(kept);
  const nn::Matrix set = pool_sets(encoder, rows, {0, rows.rows()});
  DrivingState s;
  s.values.resize(set.cols() + kElseDim);
  s.values.head(set.cols()) = set.row(0).transpose();
  for (int i = 0; i < kElseDim; ++i) s.values[set.cols() + i] = kept.x_else[i];
  return s;
}

DpGradient encode_dp_backward(const Observation& obs, const nn::MlpParams& encoder, const nn::Vector& state_adjoint) {
  check_encoder_shape(encoder);
  const Eigen::Index d3 = encoder.output_width();
  if (state_adjoint.size() != d3 + kElseDim) throw UsageError("state adjoint has the wrong length");
  const Observation kept = truncate_to_caps(obs);
  const nn::Matrix rows = feature_rows(kept);
  SetPoolTape tape;
  pool_sets(encoder, rows, {0, rows.rows()}, &tape);

  DpGradient out;
  out.encoder = nn::MlpGradient::zeros_like(encoder);
  const nn::Matrix set_adjoint = state_adjoint.head(d3).transpose();
  const nn::Matrix feature_adjoint = pool_sets_backward(tape, set_adjoint, out.encoder);
  out.participants.resize(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (int c = 0; c < kFeatureDim; ++c) out.participants[r][c] = feature_adjoint(r, c);
  }
  for (int i = 0; i < kElseDim; ++i) out.x_else[i] = state_adjoint[d3 + i];
  return out;
}

std::array<int, kFpSlots> fp_slot_sources(const Observation& obs) {
  std::array<int, kFpSlots> slots;
  slots.fill(-1);
  const int nv = static_cast<int>(obs.vehicles.size());
  const int nb = static_cast<int>(obs.bicycles.size());
  const std::vector<int> v = by_distance(obs.vehicles, 0);
  const std::vector<int> b = by_distance(obs.bicycles, nv);
  const std::vector<int> p = by_distance(obs.pedestrians, nv + nb);
  for (int i = 0; i < kFpVehicles && i < static_cast<int>(v.size()); ++i) slots[i] = v[i];
  for (int i = 0; i < kFpBicycles && i < static_cast<int>(b.size()); ++i) slots[kFpVehicles + i] = b[i];
  for (int i = 0; i < kFpPedestrians && i < static_cast<int>(p.size()); ++i) {
    slots[kFpVehicles + kFpBicycles + i] = p[i];
  }
  return slots;
}

nn::Vector encode_fp(const Observation& obs) {
  const std::vector<ParticipantFeature> all = obs.canonical_participants();
  const std::array<int, kFpSlots> slots = fp_slot_sources(obs);
  nn::Vector out = nn::Vector::Zero(kFpStateDim);
  for (int s = 0; s < kFpSlots; ++s) {
    ParticipantFeature f;
    if (slots[s] >= 0) {
      f = all[slots[s]];
    } else {
      f.kind = s < kFpVehicles ? ParticipantKind::kVehicle
               : s < kFpVehicles + kFpBicycles ? ParticipantKind::kBicycle
                                               : ParticipantKind::kPedestrian;
    }
    const auto a = f.as_array();
    for (int c = 0; c < kFeatureDim; ++c) out[s * kFeatureDim + c] = a[c];
  }
  for (int i = 0; i < kElseDim; ++i) out[kFpSlots * kFeatureDim + i] = obs.x_else[i];
  return out;
}

}  // namespace eidc
