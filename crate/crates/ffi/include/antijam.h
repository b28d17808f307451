#ifndef ANTIJAM_H
#define ANTIJAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum AjStatus {
  AJ_STATUS_OK = 0,
  AJ_STATUS_NULL_POINTER = 1,
  AJ_STATUS_INVALID_ARGUMENT = 2,
  AJ_STATUS_CONFIG = 3,
  AJ_STATUS_IO = 4,
  AJ_STATUS_INTERNAL = 5,
} AjStatus;

/**
 * An environment together with its fixed jammers.
 */
typedef struct AjEnvironment AjEnvironment;

/**
 * Summary of one simulated hop.
 */
typedef struct AjHopResult {
  /**
   * 1 when every slot cleared the threshold.
   */
  int32_t ack;
  /**
   * Minimum SINR over the hop in dB.
   */
  double user_reward;
  /**
   * +1 on NACK, -1 on ACK.
   */
  double jammer_reward;
} AjHopResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. Valid until the next call on this thread.
 */
const char *aj_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *aj_version(void);

/**
 * Creates a jammer-free desk-scale environment.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle pointer.
 */
enum AjStatus aj_env_new_desk(uint64_t seed, struct AjEnvironment **out);

/**
 * Creates an environment from an experiment configuration in TOML. Its fixed
 * jammers act on every step.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AjStatus aj_env_from_toml(const char *toml, uint64_t seed, struct AjEnvironment **out);

/**
 * Releases an environment. Null is ignored.
 *
 * # Safety
 * `env` must come from an `aj_env_*` constructor and not be used afterwards.
 */
void aj_env_free(struct AjEnvironment *env);

/**
 * Channel count and waterfall shape.
 *
 * # Safety
 * All pointers must be valid.
 */
enum AjStatus aj_env_dims(const struct AjEnvironment *env,
                          size_t *channels,
                          size_t *rows,
                          size_t *bins);

/**
 * Simulates one hop with the user on `channel`.
 *
 * # Safety
 * `env` must be a live handle and `out` valid.
 */
enum AjStatus aj_env_step(struct AjEnvironment *env, size_t channel, struct AjHopResult *out);

/**
 * Copies the current waterfall (dB, oldest row first) into `buf` of `len` values.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum AjStatus aj_env_waterfall(const struct AjEnvironment *env, double *buf, size_t len);

/**
 * Copies the last hop's coarse spectrum (dB per channel) into `buf`.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum AjStatus aj_env_coarse(const struct AjEnvironment *env, double *buf, size_t len);

/**
 * Runs an experiment described in TOML and writes its metrics to `out_path`.
 *
 * # Safety
 * Both strings must be NUL-terminated.
 */
enum AjStatus aj_run_experiment(const char *toml, const char *out_path);

/**
 * Finite-difference gradient checks over `seeds` seeds per layer kind.
 *
 * # Safety
 * Output pointers must be valid.
 */
enum AjStatus aj_gradcheck(uint64_t base_seed,
                           uint64_t seeds,
                           double *max_rel_error,
                           int32_t *all_passed);

/**
 * Joint decision over `len` channels.
 *
 * # Safety
 * `q` and `c_hat` must hold `len` doubles; `out` must be valid.
 */
enum AjStatus aj_joint_decide(const double *q, const double *c_hat, size_t len, size_t *out);

/**
 * Monte-Carlo random hopping throughput against the fixed jammers of a TOML config.
 *
 * # Safety
 * `toml` must be NUL-terminated and `throughput` valid.
 */
enum AjStatus aj_oracle_random_fh(const char *toml,
                                  uint64_t hops,
                                  uint64_t seed,
                                  double *throughput);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANTIJAM_H */
