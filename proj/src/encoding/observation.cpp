#include "encoding/observation.hpp"

#include <cmath>
#include <string>

#include "common/binary_io.hpp"
#include "common/error.hpp"

namespace eidc {
namespace {

void check_set(const std::vector<ParticipantFeature>& set, ParticipantKind kind, const char* name) {
  for (const auto& p : set) {
    if (p.kind != kind) throw ConfigError(std::string("observation: wrong participant kind in ") + name + " set");
    if (!(p.length > 0.0) || !(p.width > 0.0)) {
      throw ConfigError(std::string("observation: non-positive body size in ") + name + " set");
    }
  }
}

}  // namespace

double ParticipantFeature::distance() const { return std::hypot(rel_x, rel_y); }

std::vector<ParticipantFeature> Observation::canonical_participants() const {
  std::vector<ParticipantFeature> all;
  all.reserve(participant_count());
  all.insert(all.end(), vehicles.begin(), vehicles.end());
  all.insert(all.end(), bicycles.begin(), bicycles.end());
  all.insert(all.end(), pedestrians.begin(), pedestrians.end());
  return all;
}

void validate(const Observation& obs) {
  check_set(obs.vehicles, ParticipantKind::kVehicle, "vehicle");
  check_set(obs.bicycles, ParticipantKind::kBicycle, "bicycle");
  check_set(obs.pedestrians, ParticipantKind::kPedestrian, "pedestrian");
}

std::vector<std::uint8_t> serialize(const Observation& obs) {
  ByteWriter w;
  w.put_u32(static_cast<std::uint32_t>(obs.vehicles.size()));
  w.put_u32(static_cast<std::uint32_t>(obs.bicycles.size()));
  w.put_u32(static_cast<std::uint32_t>(obs.pedestrians.size()));
  for (const auto& p : obs.canonical_participants()) w.put_f64s(p.as_array());
  w.put_f64s(obs.x_else);
  return w.take();
}

Observation deserialize_observation(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const std::uint32_t counts[3] = {r.get_u32(), r.get_u32(), r.get_u32()};
  const std::size_t total = std::size_t{counts[0]} + counts[1] + counts[2];
  const std::size_t expected = (total * kFeatureDim + kElseDim) * sizeof(double);
  if (r.remaining() != expected) throw ConfigError("observation record has the wrong length for its counts");

  Observation obs;
  std::vector<ParticipantFeature>* sets[3] = {&obs.vehicles, &obs.bicycles, &obs.pedestrians};
  for (int s = 0; s < 3; ++s) {
    for (std::uint32_t i = 0; i < counts[s]; ++i) {
      ParticipantFeature p;
      p.rel_x = r.get_f64();
      p.rel_y = r.get_f64();
      p.speed = r.get_f64();
      p.heading = r.get_f64();
      p.length = r.get_f64();
      p.width = r.get_f64();
      const double kind = r.get_f64();
      if (kind != 0.0 && kind != 1.0 && kind != 2.0) throw ConfigError("observation record has an invalid kind");
      p.kind = static_cast<ParticipantKind>(static_cast<int>(kind));
      sets[s]->push_back(p);
    }
  }
  for (double& v : obs.x_else) v = r.get_f64();
  validate(obs);
  return obs;
}

}  // namespace eidc
