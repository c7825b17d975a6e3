#include "world/lights.hpp"

#include <cmath>

#include "common/error.hpp"

namespace eidc::world {

LightSystem::LightSystem(const LightConfig& config) : durations_(config.durations), offset_(config.offset) {
  cycle_ = 0.0;
  for (double d : durations_) {
    if (!(d > 0)) throw ConfigError("light phase durations must be positive");
    cycle_ += d;
  }
}

double LightSystem::clock(double t) const {
  double c = std::fmod(t + offset_, cycle_);
  if (c < 0) c += cycle_;
  return c;
}

int LightSystem::phase_at(double t) const {
  double c = clock(t);
  for (int p = 0; p < 6; ++p) {
    if (c < durations_[p]) return p;
    c -= durations_[p];
  }
  return 5;
}

bool LightSystem::movement_green(int phase, int arm, Task movement) {
  if (movement == Task::kRight) return true;
  const bool north_south = arm == 0 || arm == 2;
  if (phase == 0 || phase == 1) return north_south;
  if (phase == 3 || phase == 4) return !north_south;
  return false;
}

bool LightSystem::walk(int phase, int arm) {
  const bool north_south = arm == 0 || arm == 2;
  return north_south ? phase == 3 : phase == 0;
}

}  // namespace eidc::world
