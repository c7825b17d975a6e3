#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "eidc/eidc.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitInterrupted = 130;

extern "C" void on_signal(int) { eidc_request_stop(); }

int exit_code(eidc_status s) {
  switch (s) {
    case EIDC_OK:
      return kExitOk;
    case EIDC_ERR_USAGE:
    case EIDC_ERR_CONFIG:
    case EIDC_ERR_IO:
      return kExitConfig;
    case EIDC_ERR_NUMERIC:
      return kExitNumeric;
    case EIDC_ERR_INTERRUPTED:
      return kExitInterrupted;
    case EIDC_ERR_INTERNAL:
      break;
  }
  return kExitInternal;
}

int report(eidc_status s) {
  if (s != EIDC_OK) std::fprintf(stderr, "eidc: %s\n", eidc_last_error());
  return exit_code(s);
}

struct Config {
  eidc_config* handle = nullptr;
  ~Config() { eidc_config_free(handle); }
};

struct CheckpointHandle {
  eidc_checkpoint* handle = nullptr;
  ~CheckpointHandle() { eidc_checkpoint_free(handle); }
};

eidc_status load(const std::string& path, Config& cfg) {
  if (path.empty()) return eidc_config_default(&cfg.handle);
  return eidc_config_load(path.c_str(), 1, &cfg.handle);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Encoded integrated decision and control: training, evaluation and oracle comparison"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(eidc_version()));

  std::string config_path;
  std::string out_dir = "run";
  std::string checkpoint;
  std::string task;
  std::string baseline;
  std::uint64_t seed = 1;
  std::int64_t iters = -1;
  int episodes = 100;
  int cases = 20;
  bool trajectories = false;

  CLI::App* train = app.add_subcommand("train", "Train the networks");
  train->add_option("-c,--config", config_path, "Run configuration (YAML)")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Random seed");
  train->add_option("--out", out_dir, "Output directory");
  train->add_option("--iters", iters, "Override the configured iteration count")->check(CLI::NonNegativeNumber);

  CLI::App* eval = app.add_subcommand("eval", "Run evaluation episodes");
  eval->add_option("-c,--config", config_path, "Run configuration (YAML)")->required()->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint or run directory");
  eval->add_option("--episodes", episodes, "Episode count")->check(CLI::NonNegativeNumber);
  eval->add_option("--task", task, "left, straight or right")->check(CLI::IsMember({"left", "straight", "right"}));
  eval->add_option("--seed", seed, "Seed of the first episode");
  eval->add_option("--out", out_dir, "Output directory");
  eval->add_option("--baseline", baseline, "rule: rule stack; fp: fixed-representation checkpoint")
      ->check(CLI::IsMember({"rule", "fp"}));
  eval->add_flag("--trajectories", trajectories, "Write one trajectory CSV per episode");

  CLI::App* compare = app.add_subcommand("compare-mpc", "Compare the policy with the optimization oracle");
  compare->add_option("-c,--config", config_path, "Run configuration (YAML)")->required()->check(CLI::ExistingFile);
  compare->add_option("--checkpoint", checkpoint, "Checkpoint or run directory")->required();
  compare->add_option("--cases", cases, "Held observation count")->check(CLI::NonNegativeNumber);
  compare->add_option("--seed", seed, "Random seed");
  compare->add_option("--out", out_dir, "Output directory");

  CLI::App* print = app.add_subcommand("print-config", "Print the full configuration with defaults");
  print->add_option("-c,--config", config_path, "Run configuration (YAML)")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  Config cfg;
  if (const eidc_status s = load(config_path, cfg); s != EIDC_OK) return report(s);

  if (*print) {
    char* text = nullptr;
    if (const eidc_status s = eidc_config_emit(cfg.handle, &text); s != EIDC_OK) return report(s);
    std::fputs(text, stdout);
    eidc_string_free(text);
    return kExitOk;
  }

  if (*train) {
    std::int64_t done = 0;
    const eidc_status s = eidc_train(cfg.handle, seed, iters, out_dir.c_str(), &done);
    std::printf("trained %lld iterations into %s\n", static_cast<long long>(done), out_dir.c_str());
    return report(s);
  }

  if (*eval) {
    if (!task.empty()) {
      if (const eidc_status s = eidc_config_set_task(cfg.handle, task.c_str()); s != EIDC_OK) return report(s);
    }
    const bool rule = baseline == "rule";
    if (baseline == "fp") {
      if (const eidc_status s = eidc_config_set_representation(cfg.handle, "fp"); s != EIDC_OK) return report(s);
    }
    CheckpointHandle ckpt;
    if (!rule) {
      if (checkpoint.empty()) {
        std::fprintf(stderr, "eidc: --checkpoint is required unless --baseline rule\n");
        return kExitConfig;
      }
      if (const eidc_status s = eidc_checkpoint_load(checkpoint.c_str(), &ckpt.handle); s != EIDC_OK) return report(s);
    }
    eidc_eval_summary sm{};
    const eidc_status s = eidc_eval(cfg.handle, ckpt.handle, rule ? EIDC_CONTROLLER_RULE : EIDC_CONTROLLER_POLICY,
                                    episodes, seed, out_dir.c_str(), trajectories ? 1 : 0, &sm);
    if (s == EIDC_OK || s == EIDC_ERR_INTERRUPTED) {
      std::printf("episodes %d completed %d collisions %d off_road %d red_light_violations %d "
                  "time_to_pass %.3f comfort %.4f latency_ms %.4f\n",
                  sm.episodes, sm.completed, sm.collisions, sm.off_road, sm.red_light_violations, sm.time_to_pass_mean,
                  sm.comfort_mean, sm.latency_mean_ms);
    }
    return report(s);
  }

  if (*compare) {
    CheckpointHandle ckpt;
    if (const eidc_status s = eidc_checkpoint_load(checkpoint.c_str(), &ckpt.handle); s != EIDC_OK) return report(s);
    eidc_compare_summary sm{};
    const eidc_status s = eidc_compare_mpc(cfg.handle, ckpt.handle, cases, seed, out_dir.c_str(), &sm);
    if (s == EIDC_OK) {
      std::printf("cases %d j_policy %.4f j_mpc %.4f ratio %.4f d_steer %.4f d_accel %.4f\n", sm.cases,
                  sm.j_policy_mean, sm.j_mpc_mean, sm.ratio, sm.d_steer_mean, sm.d_accel_mean);
    }
    return report(s);
  }
  return kExitInternal;
}
