#pragma once

#include <array>
#include <vector>

#include "encoding/observation.hpp"
#include "nn/mlp.hpp"

namespace eidc {

struct SetCaps {
  int vehicles = kMaxVehicles;
  int bicycles = kMaxBicycles;
  int pedestrians = kMaxPedestrians;
};

// Drops the farthest participants of any set that exceeds its cap. Kept
// participants retain their stored order.
Observation truncate_to_caps(const Observation& obs, const SetCaps& caps = {});

// Throws ConfigError unless the encoder maps 7 features to at least
// min_set_dim(...) outputs.
void check_encoder_shape(const nn::MlpParams& encoder, const SetCaps& caps = {});

struct DrivingState {
  nn::Vector values;
};

// Sum pooling over rows of `features` grouped by sample: rows
// [offsets[b], offsets[b+1]) belong to sample b. The output layer is affine,
// so hidden activations are summed first and projected once per sample.
class SetPoolTape {
 public:
  bool recorded() const { return encoder_ != nullptr; }

 private:
  friend nn::Matrix pool_sets(const nn::MlpParams&, const nn::Matrix&, const std::vector<Eigen::Index>&,
                              SetPoolTape*);
  friend nn::Matrix pool_sets_backward(SetPoolTape&, const nn::Matrix&, nn::MlpGradient&);

  const nn::MlpParams* encoder_ = nullptr;
  nn::MlpTape hidden_;
  nn::Matrix pooled_;
  std::vector<Eigen::Index> offsets_;
  bool consumed_ = false;
};

nn::Matrix pool_sets(const nn::MlpParams& encoder, const nn::Matrix& features,
                     const std::vector<Eigen::Index>& offsets, SetPoolTape* tape = nullptr);

// Returns the adjoint of every feature row.
nn::Matrix pool_sets_backward(SetPoolTape& tape, const nn::Matrix& set_adjoint, nn::MlpGradient& grads);

// Participants (after cap truncation) as rows in canonical order.
nn::Matrix feature_rows(const Observation& obs);

DrivingState encode_dp(const Observation& obs, const nn::MlpParams& encoder);

struct DpGradient {
  nn::MlpGradient encoder;
  std::vector<std::array<double, kFeatureDim>> participants;  // canonical order, after truncation
  std::array<double, kElseDim> x_else{};
};

DpGradient encode_dp_backward(const Observation& obs, const nn::MlpParams& encoder, const nn::Vector& state_adjoint);

inline constexpr int kFpVehicles = 8;
inline constexpr int kFpBicycles = 4;
inline constexpr int kFpPedestrians = 4;
inline constexpr int kFpSlots = kFpVehicles + kFpBicycles + kFpPedestrians;
inline constexpr int kFpStateDim = kFpSlots * kFeatureDim + kElseDim;

// For each FP slot, the index into obs.canonical_participants() that fills
// it, or -1 for padding.
std::array<int, kFpSlots> fp_slot_sources(const Observation& obs);

nn::Vector encode_fp(const Observation& obs);

}  // namespace eidc
