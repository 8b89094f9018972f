/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef QUADRL_H
#define QUADRL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QrlStatus {
  QRL_STATUS_OK = 0,
  QRL_STATUS_NULL_POINTER = 1,
  QRL_STATUS_INVALID_ARGUMENT = 2,
  QRL_STATUS_CONFIG = 3,
  QRL_STATUS_EPISODE_FINISHED = 4,
  QRL_STATUS_SIMULATION = 5,
  QRL_STATUS_IO = 6,
  QRL_STATUS_SNAPSHOT = 7,
  QRL_STATUS_PANIC = 8,
} QrlStatus;

/**
 * Simulator instance.
 */
typedef struct QrlEnv QrlEnv;

/**
 * Loaded policy.
 */
typedef struct QrlPolicy QrlPolicy;

/**
 * True simulator state, for diagnostics.
 */
typedef struct QrlState {
  double position[3];
  double velocity[3];
  /**
   * Row-major body-to-world rotation.
   */
  double rotation[9];
  double angular_velocity[3];
  double motor_filtered[4];
  double motor_noise[4];
  double goal_position[3];
  double time;
  uint64_t tick;
} QrlState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next failing call.
 */
const char *qrl_last_error(void);

size_t qrl_obs_dim(void);

size_t qrl_act_dim(void);

/**
 * Creates a simulator from a TOML document (may be empty for defaults).
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string; `out` must be writable.
 */
enum QrlStatus qrl_env_new(const char *config_toml, uint64_t seed, struct QrlEnv **out);

/**
 * # Safety
 * `env` must come from [`qrl_env_new`] and not be used afterwards. Null is ignored.
 */
void qrl_env_free(struct QrlEnv *env);

/**
 * Starts an episode. A non-null `seed` reseeds the simulator first.
 *
 * # Safety
 * `env` must be a live handle; `obs` must hold 18 doubles.
 */
enum QrlStatus qrl_env_reset(struct QrlEnv *env, const uint64_t *seed, double *obs);

/**
 * Advances one policy tick. `terminated` reports a runaway abort, `truncated` the time limit.
 *
 * # Safety
 * `env` must be a live handle; `action` holds 4 doubles, `obs` room for 18; the flag and
 * reward pointers must be writable.
 */
enum QrlStatus qrl_env_step(struct QrlEnv *env,
                            const double *action,
                            double *obs,
                            double *reward,
                            bool *terminated,
                            bool *truncated);

/**
 * # Safety
 * `env` must be a live handle and `out` writable.
 */
enum QrlStatus qrl_env_state(const struct QrlEnv *env, struct QrlState *out);

/**
 * Writes the resolved configuration as TOML. `needed` receives the size including the NUL;
 * with a null or short buffer nothing else is written and the call still succeeds.
 *
 * # Safety
 * `env` must be a live handle; `buf` must hold `len` bytes when non-null.
 */
enum QrlStatus qrl_env_config(const struct QrlEnv *env, char *buf, size_t len, size_t *needed);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum QrlStatus qrl_policy_load(const char *path, struct QrlPolicy **out);

/**
 * Loads a policy from snapshot bytes.
 *
 * # Safety
 * `data` must hold `len` bytes; `out` must be writable.
 */
enum QrlStatus qrl_policy_from_bytes(const uint8_t *data, size_t len, struct QrlPolicy **out);

/**
 * Deterministic (mean) action for one observation.
 *
 * # Safety
 * `policy` must be a live handle; `obs` holds 18 doubles and `action` room for 4.
 */
enum QrlStatus qrl_policy_forward(const struct QrlPolicy *policy,
                                  const double *obs,
                                  double *action);

/**
 * # Safety
 * `policy` must come from a `qrl_policy_*` constructor and not be used afterwards.
 */
void qrl_policy_free(struct QrlPolicy *policy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUADRL_H */
