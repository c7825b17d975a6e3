#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "eval/harness.hpp"
#include "mpc/oracle.hpp"
#include "trainer/train.hpp"
#include "world/map.hpp"

namespace eidc::config {

struct RunConfig {
  vehicle::BicycleParams vehicle;
  vehicle::ActionBounds bounds;
  world::WorldConfig world;
  world::RouteSpeeds speeds;
  world::LightConfig lights;
  world::SensorConfig sensors;
  objective::UtilityWeights weights;
  objective::SafetyParams safety;
  world::Task task = world::Task::kRight;
  int horizon = 25;
  trainer::TrainConfig train;
  trainer::SamplerConfig sampler;
  eval::EvalConfig eval;
  int eval_episodes = 100;
  mpc::SolveOptions mpc;
  int mpc_cases = 20;

  trainer::RolloutModel rollout_model(const world::IntersectionMap& map) const;
  trainer::TrainSetup train_setup() const;
  eval::EvalConfig eval_config() const;
  void validate() const;
};

// Returns the value for an environment variable name, or nullopt.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// YAML mapping of sections to keys. Missing keys keep their defaults;
// unknown sections or keys and malformed values throw ConfigError with the
// source name and line. Overrides named EIDC_<SECTION>_<KEY> are applied
// afterwards when `env` is given.
RunConfig parse_config(std::string_view text, const std::string& source = "<config>", const EnvLookup& env = {});
RunConfig load_config(const std::filesystem::path& path, const EnvLookup& env = {});

// Every key with its value; published reference defaults are marked.
std::string emit_config(const RunConfig& config);

}  // namespace eidc::config
