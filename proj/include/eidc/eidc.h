#ifndef EIDC_EIDC_H
#define EIDC_EIDC_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define EIDC_API __declspec(dllexport)
#else
#define EIDC_API __attribute__((visibility("default")))
#endif

typedef enum eidc_status {
  EIDC_OK = 0,
  EIDC_ERR_USAGE = 1,
  EIDC_ERR_CONFIG = 2,
  EIDC_ERR_NUMERIC = 3,
  EIDC_ERR_IO = 4,
  EIDC_ERR_INTERRUPTED = 5,
  EIDC_ERR_INTERNAL = 6
} eidc_status;

typedef enum eidc_controller { EIDC_CONTROLLER_POLICY = 0, EIDC_CONTROLLER_RULE = 1 } eidc_controller;

typedef struct eidc_config eidc_config;
typedef struct eidc_checkpoint eidc_checkpoint;

typedef struct eidc_checkpoint_info {
  int64_t iteration;
  uint64_t seed;
  double rho;
  int fixed_representation; /* 0 dynamic, 1 fixed */
  int set_dim;              /* 0 for the fixed representation */
  int state_dim;
  int hidden;
  int hidden_layers;
} eidc_checkpoint_info;

typedef struct eidc_eval_summary {
  int episodes;
  int completed;
  int collisions;
  int off_road;
  int red_light_violations;
  double time_to_pass_mean; /* over completed episodes, NaN when none */
  double comfort_mean;
  double latency_mean_ms;
  double latency_max_ms;
} eidc_eval_summary;

typedef struct eidc_compare_summary {
  int cases;
  double j_policy_mean;
  double j_mpc_mean;
  double ratio; /* j_policy_mean / j_mpc_mean */
  double d_steer_mean;
  double d_accel_mean;
} eidc_compare_summary;

/* Library version, e.g. "0.1.0". */
EIDC_API const char* eidc_version(void);

/* Message of the last failed call on this thread; empty when none. */
EIDC_API const char* eidc_last_error(void);

EIDC_API void eidc_string_free(char* s);

/* Configuration. `use_env` applies EIDC_<SECTION>_<KEY> overrides. */
EIDC_API eidc_status eidc_config_default(eidc_config** out);
EIDC_API eidc_status eidc_config_parse(const char* text, const char* source, int use_env, eidc_config** out);
EIDC_API eidc_status eidc_config_load(const char* path, int use_env, eidc_config** out);
EIDC_API eidc_status eidc_config_emit(const eidc_config* cfg, char** out);
/* "left", "straight" or "right". */
EIDC_API eidc_status eidc_config_set_task(eidc_config* cfg, const char* task);
/* "dp" or "fp". */
EIDC_API eidc_status eidc_config_set_representation(eidc_config* cfg, const char* representation);
EIDC_API void eidc_config_free(eidc_config* cfg);

/* Stop flag polled by long-running calls. Safe to call from a signal handler. */
EIDC_API void eidc_request_stop(void);
EIDC_API void eidc_clear_stop(void);

/* Trains under `out_dir`. `iterations` < 0 keeps the configured count.
 * Returns EIDC_ERR_INTERRUPTED after flushing a checkpoint when stopped. */
EIDC_API eidc_status eidc_train(const eidc_config* cfg, uint64_t seed, int64_t iterations, const char* out_dir,
                                int64_t* iterations_done);

/* `dir` is a checkpoint directory or a run directory holding a `latest` file. */
EIDC_API eidc_status eidc_checkpoint_load(const char* dir, eidc_checkpoint** out);
EIDC_API eidc_status eidc_checkpoint_info_get(const eidc_checkpoint* ckpt, eidc_checkpoint_info* out);
EIDC_API void eidc_checkpoint_free(eidc_checkpoint* ckpt);

/* Episodes use seeds seed, seed + 1, ... and write metrics.csv and
 * latency.csv under `out_dir`; with `trajectories`, also
 * trajectories/episode_NNNN.csv. `ckpt` may be NULL for the rule controller.
 * A checkpoint whose shape differs from the configuration is EIDC_ERR_CONFIG. */
EIDC_API eidc_status eidc_eval(const eidc_config* cfg, const eidc_checkpoint* ckpt, eidc_controller controller,
                               int episodes, uint64_t seed, const char* out_dir, int trajectories,
                               eidc_eval_summary* summary);

/* Policy versus the optimization oracle on `cases` held observations; writes
 * compare_mpc.csv under `out_dir`. */
EIDC_API eidc_status eidc_compare_mpc(const eidc_config* cfg, const eidc_checkpoint* ckpt, int cases, uint64_t seed,
                                      const char* out_dir, eidc_compare_summary* summary);

#ifdef __cplusplus
}
#endif

#endif
