#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace eidc {

enum class ParticipantKind : int { kVehicle = 0, kBicycle = 1, kPedestrian = 2 };

inline constexpr int kFeatureDim = 7;  // d1
inline constexpr int kElseDim = 24;    // d2
inline constexpr int kMaxVehicles = 10;
inline constexpr int kMaxBicycles = 6;
inline constexpr int kMaxPedestrians = 6;

// Smallest encoder output width for which an injective sum encoding exists.
constexpr int min_set_dim(int max_vehicles, int max_bicycles, int max_pedestrians, int feature_dim) {
  return (max_vehicles + max_bicycles + max_pedestrians) * feature_dim + 1;
}
inline constexpr int kSetDim = min_set_dim(kMaxVehicles, kMaxBicycles, kMaxPedestrians, kFeatureDim);  // d3
inline constexpr int kStateDim = kSetDim + kElseDim;

// Layout of the 24-element ego/road vector.
namespace xe {
inline constexpr int kEgoX = 0;
inline constexpr int kEgoY = 1;
inline constexpr int kVx = 2;
inline constexpr int kVy = 3;
inline constexpr int kHeading = 4;
inline constexpr int kYawRate = 5;
inline constexpr int kLength = 6;
inline constexpr int kWidth = 7;
inline constexpr int kPhase = 8;
inline constexpr int kDistanceError = 9;
inline constexpr int kSpeedError = 10;
inline constexpr int kHeadingError = 11;
inline constexpr int kPreview = 12;  // 3 points x (x_ref, y_ref, heading_ref, v_ref)
inline constexpr int kPreviewStride = 4;
inline constexpr std::array<double, 3> kPreviewDistances = {5.0, 10.0, 15.0};
}  // namespace xe

struct Shape {
  double length;
  double width;
};

// Default body dimensions per participant kind.
constexpr Shape default_shape(ParticipantKind kind) {
  switch (kind) {
    case ParticipantKind::kVehicle:
      return {4.8, 2.0};
    case ParticipantKind::kBicycle:
      return {2.0, 0.48};
    case ParticipantKind::kPedestrian:
      return {0.48, 0.48};
  }
  return {0.0, 0.0};
}

// One perceived participant; position is relative to the ego vehicle.
struct ParticipantFeature {
  double rel_x = 0.0;
  double rel_y = 0.0;
  double speed = 0.0;
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;
  ParticipantKind kind = ParticipantKind::kVehicle;

  std::array<double, kFeatureDim> as_array() const {
    return {rel_x, rel_y, speed, heading, length, width, static_cast<double>(kind)};
  }
  double distance() const;

  bool operator==(const ParticipantFeature&) const = default;
};

struct Observation {
  std::vector<ParticipantFeature> vehicles;
  std::vector<ParticipantFeature> bicycles;
  std::vector<ParticipantFeature> pedestrians;
  std::array<double, kElseDim> x_else{};

  std::size_t participant_count() const { return vehicles.size() + bicycles.size() + pedestrians.size(); }
  // Vehicles, then bicycles, then pedestrians, each in stored order.
  std::vector<ParticipantFeature> canonical_participants() const;

  bool operator==(const Observation&) const = default;
};

// Record layout: u32 L, u32 M, u32 N, then (L+M+N) x 7 f64 features in
// canonical order, then 24 f64 for x_else. All little-endian.
std::vector<std::uint8_t> serialize(const Observation& obs);
Observation deserialize_observation(std::span<const std::uint8_t> bytes);

// Throws ConfigError when a set holds a participant of the wrong kind or a
// non-positive body dimension.
void validate(const Observation& obs);

}  // namespace eidc
