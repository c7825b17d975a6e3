#include "eidc/eidc.h"

#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/files.hpp"
#include "common/version.hpp"
#include "config/config.hpp"
#include "eval/harness.hpp"
#include "mpc/oracle.hpp"
#include "trainer/checkpoint.hpp"
#include "trainer/train.hpp"

struct eidc_config {
  eidc::config::RunConfig cfg;
};

struct eidc_checkpoint {
  eidc::trainer::Checkpoint ckpt;
};

namespace {

namespace fs = std::filesystem;
using namespace eidc;

thread_local std::string g_last_error;
std::atomic<bool> g_stop{false};

eidc_status fail(eidc_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <typename F>
eidc_status guarded(F&& body) {
  g_last_error.clear();
  try {
    return body();
  } catch (const ConfigError& e) {
    return fail(EIDC_ERR_CONFIG, e.what());
  } catch (const NumericError& e) {
    return fail(EIDC_ERR_NUMERIC, e.what());
  } catch (const IoError& e) {
    return fail(EIDC_ERR_IO, e.what());
  } catch (const UsageError& e) {
    return fail(EIDC_ERR_USAGE, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(EIDC_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(EIDC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(EIDC_ERR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

const world::IntersectionMap& map_for(const config::RunConfig& cfg) {
  // Maps are immutable once built; cache the most recent one per speed profile.
  thread_local std::unique_ptr<world::IntersectionMap> map;
  thread_local world::RouteSpeeds speeds;
  const auto same = [](const world::RouteSpeeds& a, const world::RouteSpeeds& b) {
    return a.vehicle.limit == b.vehicle.limit && a.vehicle.lateral_accel == b.vehicle.lateral_accel &&
           a.vehicle.taper == b.vehicle.taper && a.vehicle.floor == b.vehicle.floor && a.bicycle == b.bicycle &&
           a.pedestrian == b.pedestrian;
  };
  if (!map || !same(speeds, cfg.speeds)) {
    map = std::make_unique<world::IntersectionMap>(cfg.speeds);
    speeds = cfg.speeds;
  }
  return *map;
}

std::string widths_text(const nn::MlpParams& p) {
  return p.num_layers() == 0 ? std::string("none") : fmt::format("{}", fmt::join(p.widths(), ","));
}

void check_shape(const trainer::Networks& nets, const trainer::NetworkShape& shape) {
  const trainer::Networks expected = trainer::Networks::create(shape, 0);
  if (nets.representation != expected.representation) {
    throw ConfigError(fmt::format("checkpoint representation {} differs from the configured {}",
                                  trainer::representation_name(nets.representation),
                                  trainer::representation_name(expected.representation)));
  }
  const std::pair<const char*, std::pair<const nn::MlpParams*, const nn::MlpParams*>> parts[] = {
      {"encoder", {&nets.encoder, &expected.encoder}},
      {"policy", {&nets.policy, &expected.policy}},
      {"value", {&nets.value, &expected.value}}};
  for (const auto& [name, pair] : parts) {
    if (pair.first->widths() != pair.second->widths()) {
      throw ConfigError(fmt::format("checkpoint {} widths {} differ from the configured {}", name,
                                    widths_text(*pair.first), widths_text(*pair.second)));
    }
  }
}

fs::path resolve_checkpoint(const fs::path& dir) {
  if (fs::exists(dir / "manifest.txt")) return dir;
  for (const fs::path& base : {dir, dir / "checkpoints"}) {
    if (fs::exists(base / "latest")) {
      std::string name = read_text_file(base / "latest");
      while (!name.empty() && (name.back() == '\n' || name.back() == '\r')) name.pop_back();
      return base / name;
    }
  }
  return dir;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

extern "C" {

const char* eidc_version(void) { return eidc::kVersion; }

const char* eidc_last_error(void) { return g_last_error.c_str(); }

void eidc_string_free(char* s) { delete[] s; }

eidc_status eidc_config_default(eidc_config** out) {
  return guarded([&] {
    if (out == nullptr) throw UsageError("null output handle");
    *out = new eidc_config{};
    return EIDC_OK;
  });
}

eidc_status eidc_config_parse(const char* text, const char* source, int use_env, eidc_config** out) {
  return guarded([&] {
    if (text == nullptr || out == nullptr) throw UsageError("null argument");
    const config::EnvLookup env = use_env ? config::process_env() : config::EnvLookup{};
    auto* c = new eidc_config{config::parse_config(text, source ? source : "<config>", env)};
    *out = c;
    return EIDC_OK;
  });
}

eidc_status eidc_config_load(const char* path, int use_env, eidc_config** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr) throw UsageError("null argument");
    const config::EnvLookup env = use_env ? config::process_env() : config::EnvLookup{};
    *out = new eidc_config{config::load_config(path, env)};
    return EIDC_OK;
  });
}

eidc_status eidc_config_emit(const eidc_config* cfg, char** out) {
  return guarded([&] {
    if (cfg == nullptr || out == nullptr) throw UsageError("null argument");
    *out = copy_string(config::emit_config(cfg->cfg));
    return EIDC_OK;
  });
}

eidc_status eidc_config_set_task(eidc_config* cfg, const char* task) {
  return guarded([&] {
    if (cfg == nullptr || task == nullptr) throw UsageError("null argument");
    try {
      cfg->cfg.task = world::parse_task(task);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    return EIDC_OK;
  });
}

eidc_status eidc_config_set_representation(eidc_config* cfg, const char* representation) {
  return guarded([&] {
    if (cfg == nullptr || representation == nullptr) throw UsageError("null argument");
    try {
      cfg->cfg.train.shape.representation = trainer::parse_representation(representation);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    return EIDC_OK;
  });
}

void eidc_config_free(eidc_config* cfg) { delete cfg; }

void eidc_request_stop(void) { g_stop.store(true); }

void eidc_clear_stop(void) { g_stop.store(false); }

eidc_status eidc_train(const eidc_config* cfg, uint64_t seed, int64_t iterations, const char* out_dir,
                       int64_t* iterations_done) {
  return guarded([&] {
    if (cfg == nullptr || out_dir == nullptr) throw UsageError("null argument");
    config::RunConfig c = cfg->cfg;
    if (iterations >= 0) c.train.iterations = iterations;
    c.validate();
    const trainer::TrainResult r = trainer::train(map_for(c), c.train_setup(), seed, out_dir, &g_stop);
    if (iterations_done != nullptr) *iterations_done = r.iterations;
    if (r.interrupted) return fail(EIDC_ERR_INTERRUPTED, fmt::format("stopped at iteration {}", r.iterations));
    return EIDC_OK;
  });
}

eidc_status eidc_checkpoint_load(const char* dir, eidc_checkpoint** out) {
  return guarded([&] {
    if (dir == nullptr || out == nullptr) throw UsageError("null argument");
    const fs::path path = resolve_checkpoint(dir);
    if (!fs::exists(path / "manifest.txt")) throw ConfigError(fmt::format("{}: no checkpoint manifest", path.string()));
    *out = new eidc_checkpoint{trainer::load_checkpoint(path)};
    return EIDC_OK;
  });
}

eidc_status eidc_checkpoint_info_get(const eidc_checkpoint* ckpt, eidc_checkpoint_info* out) {
  return guarded([&] {
    if (ckpt == nullptr || out == nullptr) throw UsageError("null argument");
    const trainer::Networks& n = ckpt->ckpt.nets;
    out->iteration = ckpt->ckpt.iteration;
    out->seed = ckpt->ckpt.seed;
    out->rho = ckpt->ckpt.rho;
    out->fixed_representation = n.representation == trainer::Representation::kFixed;
    out->set_dim = n.set_dim();
    out->state_dim = n.state_dim();
    const auto w = n.policy.widths();
    out->hidden = w.size() > 2 ? w[1] : 0;
    out->hidden_layers = static_cast<int>(w.size()) - 2;
    return EIDC_OK;
  });
}

void eidc_checkpoint_free(eidc_checkpoint* ckpt) { delete ckpt; }

eidc_status eidc_eval(const eidc_config* cfg, const eidc_checkpoint* ckpt, eidc_controller controller, int episodes,
                      uint64_t seed, const char* out_dir, int trajectories, eidc_eval_summary* summary) {
  return guarded([&] {
    if (cfg == nullptr || out_dir == nullptr) throw UsageError("null argument");
    if (episodes < 0) throw UsageError("episode count must be non-negative");
    const config::RunConfig& c = cfg->cfg;
    const bool policy = controller == EIDC_CONTROLLER_POLICY;
    if (policy) {
      if (ckpt == nullptr) throw UsageError("policy evaluation needs a checkpoint");
      check_shape(ckpt->ckpt.nets, c.train.shape);
    }
    const world::IntersectionMap& map = map_for(c);
    const trainer::RolloutModel model = c.rollout_model(map);
    const eval::EvalConfig ec = c.eval_config();
    const fs::path out = out_dir;
    fs::create_directories(out);
    if (trajectories) fs::create_directories(out / "trajectories");

    std::vector<eval::EpisodeMetrics> results;
    bool stopped = false;
    for (int i = 0; i < episodes; ++i) {
      if (g_stop.load()) {
        stopped = true;
        break;
      }
      const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
      std::vector<eval::TrajectoryRow> rows;
      results.push_back(eval::run_episode(policy ? &ckpt->ckpt.nets : nullptr,
                                          policy ? eval::Controller::kPolicy : eval::Controller::kRule, map, model, ec,
                                          s, trajectories ? &rows : nullptr));
      if (trajectories) {
        write_file_atomic(out / "trajectories" / fmt::format("episode_{:04d}.csv", i), eval::trajectory_csv(rows, s));
      }
    }
    write_file_atomic(out / "metrics.csv", eval::metrics_csv(results, seed));
    write_file_atomic(out / "latency.csv", eval::latency_csv(results, seed));

    if (summary != nullptr) {
      eidc_eval_summary sm{};
      std::vector<double> pass, comfort, latency;
      for (const eval::EpisodeMetrics& m : results) {
        sm.completed += m.completed;
        sm.collisions += m.collided;
        sm.off_road += m.off_road;
        sm.red_light_violations += m.red_light_violations;
        if (m.completed) pass.push_back(m.time_to_pass);
        comfort.push_back(m.comfort);
        latency.push_back(m.latency_mean_ms);
        sm.latency_max_ms = std::max(sm.latency_max_ms, m.latency_max_ms);
      }
      sm.episodes = static_cast<int>(results.size());
      sm.time_to_pass_mean = mean_of(pass);
      sm.comfort_mean = mean_of(comfort);
      sm.latency_mean_ms = mean_of(latency);
      *summary = sm;
    }
    if (stopped) return fail(EIDC_ERR_INTERRUPTED, fmt::format("stopped after {} episodes", results.size()));
    return EIDC_OK;
  });
}

eidc_status eidc_compare_mpc(const eidc_config* cfg, const eidc_checkpoint* ckpt, int cases, uint64_t seed,
                             const char* out_dir, eidc_compare_summary* summary) {
  return guarded([&] {
    if (cfg == nullptr || ckpt == nullptr || out_dir == nullptr) throw UsageError("null argument");
    if (cases < 0) throw UsageError("case count must be non-negative");
    const config::RunConfig& c = cfg->cfg;
    check_shape(ckpt->ckpt.nets, c.train.shape);
    const world::IntersectionMap& map = map_for(c);
    const trainer::RolloutModel model = c.rollout_model(map);
    const auto held = mpc::held_cases(map, c.train_setup(), ckpt->ckpt.nets, cases, seed);
    mpc::SolveOptions opt = c.mpc;
    opt.seed = seed;
    const auto rows = mpc::compare_policy_mpc(ckpt->ckpt.nets, held, model, opt);

    std::string csv = fmt::format("# eidc {} seed={}\n", kVersion, seed);
    csv += "case,path,d_steer,d_accel,j_policy,j_mpc,t_policy_ms,t_mpc_ms\n";
    std::vector<double> jp, jm, ds, da;
    for (const mpc::Comparison& r : rows) {
      csv += fmt::format("{},{},{},{},{},{},{:.4f},{:.4f}\n", r.case_id, held[r.case_id].path, r.d_steer, r.d_accel,
                         r.j_policy, r.j_mpc, r.t_policy_ms, r.t_mpc_ms);
      jp.push_back(r.j_policy);
      jm.push_back(r.j_mpc);
      ds.push_back(r.d_steer);
      da.push_back(r.d_accel);
    }
    fs::create_directories(out_dir);
    write_file_atomic(fs::path(out_dir) / "compare_mpc.csv", csv);
    if (summary != nullptr) {
      summary->cases = static_cast<int>(rows.size());
      summary->j_policy_mean = mean_of(jp);
      summary->j_mpc_mean = mean_of(jm);
      summary->ratio = summary->j_policy_mean / summary->j_mpc_mean;
      summary->d_steer_mean = mean_of(ds);
      summary->d_accel_mean = mean_of(da);
    }
    return EIDC_OK;
  });
}

}  // extern "C"
