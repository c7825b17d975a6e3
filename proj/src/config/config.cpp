#include "config/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <sstream>
#include <variant>
#include <vector>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "common/error.hpp"
#include "common/files.hpp"
#include "common/version.hpp"

namespace eidc::config {
namespace {

using Target = std::variant<double*, int*, std::int64_t*, std::size_t*, bool*, world::Task*,
                            trainer::Representation*, objective::CenterOffset*, std::array<double, 6>*>;

struct Field {
  const char* section;
  const char* key;
  Target target;
  bool published = false;
  const char* note = "";
};

constexpr bool kPublished = true;

std::vector<Field> fields(RunConfig& c) {
  auto& t = c.train;
  return {
      {"vehicle", "mass", &c.vehicle.mass, kPublished, "kg"},
      {"vehicle", "yaw_inertia", &c.vehicle.yaw_inertia, kPublished, "kg m^2"},
      {"vehicle", "front_axle", &c.vehicle.front_axle, kPublished, "m, CG to front axle"},
      {"vehicle", "rear_axle", &c.vehicle.rear_axle, kPublished, "m, CG to rear axle"},
      {"vehicle", "front_stiffness", &c.vehicle.front_stiffness, kPublished, "N/rad, magnitude"},
      {"vehicle", "rear_stiffness", &c.vehicle.rear_stiffness, kPublished, "N/rad, magnitude"},
      {"vehicle", "steer_min", &c.bounds.steer_min, kPublished, "rad"},
      {"vehicle", "steer_max", &c.bounds.steer_max, kPublished, "rad"},
      {"vehicle", "accel_min", &c.bounds.accel_min, kPublished, "m/s^2"},
      {"vehicle", "accel_max", &c.bounds.accel_max, kPublished, "m/s^2"},

      {"world", "dt", &c.world.dt, kPublished, "s"},
      {"world", "warmup", &c.world.warmup, false, "s simulated before the ego appears"},
      {"world", "vehicles_per_hour", &c.world.flow.vehicles_per_hour, kPublished, "per motor lane"},
      {"world", "bicycles_per_hour", &c.world.flow.bicycles_per_hour, kPublished, "per bicycle lane"},
      {"world", "pedestrians_per_hour", &c.world.flow.pedestrians_per_hour, kPublished, "per crosswalk direction"},
      {"world", "flow_scale", &c.world.flow.scale, false, "multiplies all three rates"},
      {"world", "follower_accel", &c.world.follower.accel, false, "m/s^2"},
      {"world", "follower_decel", &c.world.follower.decel, false, "m/s^2"},
      {"world", "follower_reaction", &c.world.follower.reaction, false, "s"},
      {"world", "follower_min_gap", &c.world.follower.min_gap, false, "m"},
      {"world", "follower_dawdle", &c.world.follower.dawdle, false, "0..1"},
      {"world", "speed_limit", &c.speeds.vehicle.limit, false, "m/s on straight lane segments"},
      {"world", "lateral_accel", &c.speeds.vehicle.lateral_accel, false, "m/s^2 in turns"},
      {"world", "speed_taper", &c.speeds.vehicle.taper, false, "max |dv_ref/ds|, 1/s"},
      {"world", "speed_floor", &c.speeds.vehicle.floor, false, "m/s"},
      {"world", "bicycle_speed", &c.speeds.bicycle, false, "m/s"},
      {"world", "pedestrian_speed", &c.speeds.pedestrian, false, "m/s"},

      {"lights", "durations", &c.lights.durations, false, "s per phase, six phases"},
      {"lights", "offset", &c.lights.offset, false, "cycle time at world time 0"},

      {"sensors", "camera_range", &c.sensors.camera_range, kPublished, "m"},
      {"sensors", "camera_half_fov", &c.sensors.camera_half_fov, kPublished, "deg"},
      {"sensors", "radar_range", &c.sensors.radar_range, kPublished, "m"},
      {"sensors", "radar_half_fov", &c.sensors.radar_half_fov, kPublished, "deg"},
      {"sensors", "lidar_range", &c.sensors.lidar_range, kPublished, "m, 360 deg"},
      {"sensors", "occlusion", &c.sensors.occlusion, kPublished},
      {"sensors", "position_noise", &c.sensors.position_noise, false, "m, std"},
      {"sensors", "speed_noise", &c.sensors.speed_noise, false, "m/s, std"},
      {"sensors", "heading_noise", &c.sensors.heading_noise, false, "rad, std"},

      {"objective", "speed", &c.weights.speed, kPublished},
      {"objective", "distance", &c.weights.distance, kPublished},
      {"objective", "heading", &c.weights.heading, kPublished},
      {"objective", "yaw_rate", &c.weights.yaw_rate, kPublished},
      {"objective", "steer", &c.weights.steer, kPublished},
      {"objective", "steer_rate", &c.weights.steer_rate, kPublished},
      {"objective", "accel", &c.weights.accel, kPublished},
      {"objective", "accel_rate", &c.weights.accel_rate, kPublished},
      {"objective", "ego_radius", &c.safety.ego_radius, kPublished, "m"},
      {"objective", "vehicle_radius", &c.safety.vehicle_radius, kPublished, "m"},
      {"objective", "bicycle_radius", &c.safety.bicycle_radius, kPublished, "m"},
      {"objective", "pedestrian_radius", &c.safety.pedestrian_radius, kPublished, "m"},
      {"objective", "stop_line_distance", &c.safety.stop_line_distance, kPublished, "m"},
      {"objective", "center_offset", &c.safety.offset, false, "length_plus_width | length_minus_width"},

      {"train", "task", &c.task, false, "left | straight | right"},
      {"train", "representation", &t.shape.representation, false, "dp | fp"},
      {"train", "hidden", &t.shape.hidden, kPublished},
      {"train", "hidden_layers", &t.shape.hidden_layers, kPublished},
      {"train", "set_dim", &t.shape.set_dim, kPublished, "encoder output width d3"},
      {"train", "value_scale", &t.shape.value_scale, false, "fixed value output scale"},
      {"train", "horizon", &c.horizon, kPublished, "prediction steps T"},
      {"train", "iterations", &t.iterations, kPublished},
      {"train", "batch", &t.batch, kPublished},
      {"train", "env_steps", &t.env_steps, false, "environment steps per sampler per iteration"},
      {"train", "warmup_samples", &t.warmup_samples, false},
      {"train", "samplers", &t.samplers, kPublished},
      {"train", "learners", &t.learners, kPublished},
      {"train", "log_interval", &t.log_interval, false},
      {"train", "checkpoint_interval", &t.checkpoint_interval, false},
      {"train", "policy_lr_start", &t.lr.policy_start, kPublished},
      {"train", "policy_lr_end", &t.lr.policy_end, kPublished},
      {"train", "value_lr_start", &t.lr.value_start, kPublished},
      {"train", "value_lr_end", &t.lr.value_end, kPublished},
      {"train", "encoder_lr_start", &t.lr.encoder_start, kPublished},
      {"train", "encoder_lr_end", &t.lr.encoder_end, kPublished},
      {"train", "episode_seconds", &c.sampler.episode_seconds, false},
      {"train", "start_clearance", &c.sampler.start_clearance, false, "m"},
      {"train", "lateral_jitter", &c.sampler.lateral_jitter, false, "m"},
      {"train", "heading_jitter", &c.sampler.heading_jitter, false, "rad"},
      {"train", "max_tracking_error", &c.sampler.max_tracking_error, false, "m, ends a sampling episode"},
      {"train", "pass_distance", &c.sampler.pass_distance, false, "m past the junction exit, ends a sampling episode"},

      {"buffer", "capacity", &t.buffer_capacity, kPublished},
      {"buffer", "store_states", &t.store_states, false, "value input from states stored at sampling time"},

      {"penalty", "amplifier", &t.penalty.amplifier, kPublished},
      {"penalty", "interval", &t.penalty.interval, kPublished},
      {"penalty", "max", &t.penalty.max, false},

      {"eval", "episodes", &c.eval_episodes, kPublished},
      {"eval", "max_seconds", &c.eval.max_seconds, kPublished},
      {"eval", "pass_distance", &c.eval.pass_distance, false, "m past the junction exit"},
      {"eval", "start_s", &c.eval.start_s, false, "m along the candidate paths"},
      {"eval", "start_speed", &c.eval.start_speed, false, "m/s, negative = v_ref"},
      {"eval", "start_clock", &c.eval.start_clock, false, "s into the light cycle, negative = drawn per episode"},

      {"mpc", "rho", &c.mpc.rho, false},
      {"mpc", "budget", &c.mpc.budget, false, "gradient iterations per start"},
      {"mpc", "random_starts", &c.mpc.random_starts, false},
      {"mpc", "raw_sigma", &c.mpc.raw_sigma, false},
      {"mpc", "tolerance", &c.mpc.tolerance, false},
      {"mpc", "cases", &c.mpc_cases, false},
  };
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && end == s.data() + s.size();
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string offset_name(objective::CenterOffset o) {
  return o == objective::CenterOffset::kLengthPlusWidth ? "length_plus_width" : "length_minus_width";
}

// Parses `text` into the field; returns an error message or empty.
std::string assign(const Field& f, const std::string& raw) {
  const std::string text = trim(raw);
  return std::visit(
      [&](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (text == "true") *p = true;
          else if (text == "false") *p = false;
          else return "expected true or false";
        } else if constexpr (std::is_same_v<T, world::Task>) {
          try {
            *p = world::parse_task(text);
          } catch (const Error& e) {
            return e.what();
          }
        } else if constexpr (std::is_same_v<T, trainer::Representation>) {
          try {
            *p = trainer::parse_representation(text);
          } catch (const Error& e) {
            return e.what();
          }
        } else if constexpr (std::is_same_v<T, objective::CenterOffset>) {
          if (text == "length_plus_width") *p = objective::CenterOffset::kLengthPlusWidth;
          else if (text == "length_minus_width") *p = objective::CenterOffset::kLengthMinusWidth;
          else return "expected length_plus_width or length_minus_width";
        } else if constexpr (std::is_same_v<T, std::array<double, 6>>) {
          std::string body = text;
          if (!body.empty() && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
          std::stringstream ss(body);
          std::string part;
          std::size_t n = 0;
          std::array<double, 6> v{};
          while (std::getline(ss, part, ',')) {
            if (n >= 6 || !parse_number(trim(part), v[n])) return "expected six numbers";
            ++n;
          }
          if (n != 6) return "expected six numbers";
          *p = v;
        } else {
          if (!parse_number(text, *p)) return "expected a number, got '" + text + "'";
          if constexpr (std::is_floating_point_v<T>) {
            if (!std::isfinite(*p)) return "value must be finite";
          }
        }
        return {};
      },
      f.target);
}

std::string render(const Field& f) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) return *p ? "true" : "false";
        else if constexpr (std::is_same_v<T, world::Task>) return world::task_name(*p);
        else if constexpr (std::is_same_v<T, trainer::Representation>) return trainer::representation_name(*p);
        else if constexpr (std::is_same_v<T, objective::CenterOffset>) return offset_name(*p);
        else if constexpr (std::is_same_v<T, std::array<double, 6>>) return fmt::format("[{}]", fmt::join(*p, ", "));
        else if constexpr (std::is_floating_point_v<T>) {
          std::string s = fmt::format("{}", *p);
          // Keep reals recognisable as reals.
          if (s.find_first_of(".en") == std::string::npos) s += ".0";
          return s;
        } else return fmt::format("{}", *p);
      },
      f.target);
}

std::string env_name(const Field& f) {
  std::string s = std::string("EIDC_") + f.section + "_" + f.key;
  for (char& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

std::string scalar_text(const YAML::Node& node) {
  if (node.IsSequence()) {
    std::string s = "[";
    for (std::size_t i = 0; i < node.size(); ++i) {
      if (!node[i].IsScalar()) return {};
      s += (i ? ", " : "") + node[i].Scalar();
    }
    return s + "]";
  }
  return node.Scalar();
}

}  // namespace

trainer::RolloutModel RunConfig::rollout_model(const world::IntersectionMap& map) const {
  trainer::RolloutModel m;
  m.map = &map;
  m.lights = world::LightSystem(lights);
  m.bicycle = vehicle;
  m.bounds = bounds;
  m.weights = weights;
  m.safety = safety;
  m.dt = world.dt;
  m.horizon = horizon;
  return m;
}

trainer::TrainSetup RunConfig::train_setup() const {
  trainer::TrainSetup s;
  s.train = train;
  s.sampler = sampler;
  s.sampler.world = world;
  s.sampler.sensors = sensors;
  s.sampler.task = task;
  s.lights = lights;
  s.model.bicycle = vehicle;
  s.model.bounds = bounds;
  s.model.weights = weights;
  s.model.safety = safety;
  s.model.dt = world.dt;
  s.model.horizon = horizon;
  return s;
}

eval::EvalConfig RunConfig::eval_config() const {
  eval::EvalConfig e = eval;
  e.world = world;
  e.sensors = sensors;
  e.task = task;
  return e;
}

void RunConfig::validate() const {
  vehicle.validate(4.8);
  if (!(bounds.steer_min < bounds.steer_max) || !(bounds.accel_min < bounds.accel_max)) {
    throw ConfigError("vehicle: action bounds need min < max");
  }
  if (!(world.dt > 0.0)) throw ConfigError("world.dt must be positive");
  if (horizon < 1) throw ConfigError("train.horizon must be at least 1");
  if (train.shape.hidden < 1 || train.shape.hidden_layers < 1) throw ConfigError("train: network widths must be positive");
  if (train.shape.set_dim < kSetDim) {
    throw ConfigError(fmt::format("train.set_dim {} is below the injectivity bound {}", train.shape.set_dim, kSetDim));
  }
  if (train.batch < 1 || train.iterations < 0) throw ConfigError("train: batch must be positive, iterations non-negative");
  if (train.samplers < 1 || train.learners < 1) throw ConfigError("train: samplers and learners must be positive");
  if (train.log_interval < 1 || train.checkpoint_interval < 1) throw ConfigError("train: intervals must be positive");
  if (train.buffer_capacity < 1) throw ConfigError("buffer.capacity must be positive");
  if (!(train.penalty.amplifier >= 1.0) || train.penalty.interval < 1 || !(train.penalty.max >= 1.0)) {
    throw ConfigError("penalty: amplifier and max must be >= 1, interval positive");
  }
  for (double d : lights.durations) {
    if (!(d > 0.0)) throw ConfigError("lights.durations must be positive");
  }
  if (eval_episodes < 0 || mpc_cases < 0 || mpc.budget < 1 || mpc.random_starts < 0) {
    throw ConfigError("eval/mpc counts must be non-negative and the budget positive");
  }
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr) return std::nullopt;
    return std::string(v);
  };
}

RunConfig parse_config(std::string_view text, const std::string& source, const EnvLookup& env) {
  RunConfig c;
  std::vector<Field> fs = fields(c);
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("{}:{}: {}", source, e.mark.line + 1, e.msg));
  }
  if (root.IsDefined() && !root.IsNull()) {
    if (!root.IsMap()) throw ConfigError(source + ": top level must be a mapping of sections");
    for (const auto& sec : root) {
      const std::string section = sec.first.Scalar();
      const int sec_line = sec.first.Mark().line + 1;
      if (std::none_of(fs.begin(), fs.end(), [&](const Field& f) { return section == f.section; })) {
        throw ConfigError(fmt::format("{}:{}: unknown section '{}'", source, sec_line, section));
      }
      if (sec.second.IsNull()) continue;
      if (!sec.second.IsMap()) throw ConfigError(fmt::format("{}:{}: section '{}' must be a mapping", source, sec_line, section));
      for (const auto& kv : sec.second) {
        const std::string key = kv.first.Scalar();
        const int line = kv.first.Mark().line + 1;
        const auto it = std::find_if(fs.begin(), fs.end(),
                                     [&](const Field& f) { return section == f.section && key == f.key; });
        if (it == fs.end()) throw ConfigError(fmt::format("{}:{}: unknown key '{}.{}'", source, line, section, key));
        const std::string err = assign(*it, scalar_text(kv.second));
        if (!err.empty()) throw ConfigError(fmt::format("{}:{}: {}.{}: {}", source, line, section, key, err));
      }
    }
  }
  if (env) {
    for (const Field& f : fs) {
      const auto value = env(env_name(f));
      if (!value) continue;
      const std::string err = assign(f, *value);
      if (!err.empty()) throw ConfigError(fmt::format("{}: {}", env_name(f), err));
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const EnvLookup& env) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.string(), env);
}

std::string emit_config(const RunConfig& config) {
  RunConfig copy = config;
  const std::vector<Field> fs = fields(copy);
  std::string out = fmt::format("# eidc {} configuration. Keys marked [published] keep their published reference values.\n", kVersion);
  std::string section;
  for (const Field& f : fs) {
    if (section != f.section) {
      section = f.section;
      out += fmt::format("\n{}:\n", section);
    }
    std::string comment;
    if (f.published) comment = "[published]";
    if (*f.note) comment += (comment.empty() ? "" : " ") + std::string(f.note);
    out += fmt::format("  {}: {}", f.key, render(f));
    if (!comment.empty()) out += "  # " + comment;
    out += '\n';
  }
  return out;
}

}  // namespace eidc::config
