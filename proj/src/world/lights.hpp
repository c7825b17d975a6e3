#pragma once

#include <array>

#include "world/path.hpp"

namespace eidc::world {

struct LightConfig {
  std::array<double, 6> durations{20.0, 20.0, 20.0, 20.0, 20.0, 20.0};
  double offset = 0.0;  // cycle time at world time 0
};

// Phases: 0 N/S through+left with E/W crosswalks walking, 1 N/S through+left,
// 2 clearance, 3 E/W through+left with N/S crosswalks walking, 4 E/W
// through+left, 5 clearance. Right turns are green in every phase.
class LightSystem {
 public:
  explicit LightSystem(const LightConfig& config = {});

  double cycle() const { return cycle_; }
  // Cycle time in [0, cycle) for world time t.
  double clock(double t) const;
  int phase_at(double t) const;

  static bool movement_green(int phase, int arm, Task movement);
  static bool bicycle_green(int phase, int arm) { return movement_green(phase, arm, Task::kStraight); }
  // Walk signal for the crosswalk across `arm`.
  static bool walk(int phase, int arm);

 private:
  std::array<double, 6> durations_;
  double offset_;
  double cycle_;
};

}  // namespace eidc::world
