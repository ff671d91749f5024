#ifndef MECFL_H
#define MECFL_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MecflStatus {
  MECFL_STATUS_OK = 0,
  MECFL_STATUS_NULL_POINTER = 1,
  MECFL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A value broke a documented range or consistency rule.
   */
  MECFL_STATUS_VALIDATION = 3,
  /**
   * A closed form hit a zero divisor or an empty simplex.
   */
  MECFL_STATUS_NUMERIC = 4,
  MECFL_STATUS_CONFIG = 5,
  MECFL_STATUS_IO = 6,
  /**
   * Malformed dataset file.
   */
  MECFL_STATUS_DATA = 7,
  MECFL_STATUS_PANIC = 8,
} MecflStatus;

typedef enum MecflScenario {
  MECFL_SCENARIO_PROPOSED = 0,
  MECFL_SCENARIO_TRADITIONAL = 1,
  MECFL_SCENARIO_CENTRALIZED = 2,
} MecflScenario;

typedef enum MecflField {
  MECFL_FIELD_DELTA = 0,
  MECFL_FIELD_GAMMA = 1,
  MECFL_FIELD_UPLINK_OFFLOAD = 2,
  MECFL_FIELD_UPLINK_WEIGHT = 3,
  MECFL_FIELD_LAMBDA_OFFLOAD = 4,
  MECFL_FIELD_LAMBDA_LOCAL = 5,
} MecflField;

/**
 * Outcome of a run.
 */
typedef struct MecflResult MecflResult;

/**
 * Experiment description.
 */
typedef struct MecflSpec MecflSpec;

/**
 * Scalar metrics of one iteration.
 */
typedef struct MecflRoundSummary {
  uint64_t iteration;
  double t_edge;
  double t_total;
  double train_loss;
  double test_loss;
  double weighted_score;
} MecflRoundSummary;

/**
 * One mobile user.
 */
typedef struct MecflUser {
  double transmit_power;
  double channel_gain;
  double cpu_hz;
  double energy_budget;
  uint64_t dataset_size;
} MecflUser;

/**
 * Decision variables of one user.
 */
typedef struct MecflUserAllocation {
  double delta;
  double gamma;
  double uplink_offload;
  double uplink_weight;
} MecflUserAllocation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL.
 *
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *mecfl_last_error(void);

/**
 * Default experiment: 10 users, 200 synthetic samples each.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum MecflStatus mecfl_spec_default(struct MecflSpec **out);

/**
 * Parses an experiment from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum MecflStatus mecfl_spec_from_toml(const char *toml, struct MecflSpec **out);

/**
 * Reads an experiment from a TOML file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MecflStatus mecfl_spec_load(const char *path, struct MecflSpec **out);

/**
 * # Safety
 * `spec` must be NULL or a handle from a `mecfl_spec_*` constructor that
 * has not been freed.
 */
void mecfl_spec_free(struct MecflSpec *spec);

/**
 * # Safety
 * `spec` must be a live handle.
 */
enum MecflStatus mecfl_spec_set_seed(struct MecflSpec *spec, uint64_t seed);

/**
 * # Safety
 * `spec` must be a live handle.
 */
enum MecflStatus mecfl_spec_set_users(struct MecflSpec *spec, size_t users);

/**
 * # Safety
 * `spec` must be a live handle.
 */
enum MecflStatus mecfl_spec_set_max_iterations(struct MecflSpec *spec, size_t max_iterations);

/**
 * # Safety
 * `spec` must be a live handle.
 */
enum MecflStatus mecfl_spec_set_scenario(struct MecflSpec *spec, enum MecflScenario scenario);

/**
 * Builds the population described by `spec` and runs its scenario.
 *
 * # Safety
 * `spec` must be a live handle; `out` must be writable.
 */
enum MecflStatus mecfl_run(const struct MecflSpec *spec, struct MecflResult **out);

/**
 * # Safety
 * `result` must be NULL or a handle from [`mecfl_run`] not yet freed.
 */
void mecfl_result_free(struct MecflResult *result);

/**
 * Number of iterations in the trace; 0 for a NULL handle.
 *
 * # Safety
 * `result` must be NULL or a live handle.
 */
size_t mecfl_result_iterations(const struct MecflResult *result);

/**
 * # Safety
 * `result` must be NULL or a live handle.
 */
bool mecfl_result_converged(const struct MecflResult *result);

/**
 * Number of users; 0 for a NULL handle.
 *
 * # Safety
 * `result` must be NULL or a live handle.
 */
size_t mecfl_result_users(const struct MecflResult *result);

/**
 * Metrics of trace entry `index` (0-based).
 *
 * # Safety
 * `result` must be a live handle; `out` must be writable.
 */
enum MecflStatus mecfl_result_round(const struct MecflResult *result,
                                    size_t index,
                                    struct MecflRoundSummary *out);

/**
 * Copies one per-user field of the final allocation into `buf`.
 *
 * `len` must be at least [`mecfl_result_users`].
 *
 * # Safety
 * `result` must be a live handle; `buf` must hold `len` doubles.
 */
enum MecflStatus mecfl_result_final_allocation(const struct MecflResult *result,
                                               enum MecflField field,
                                               double *buf,
                                               size_t len);

/**
 * CPU-share best response of one user under `spec`'s system constants.
 *
 * # Safety
 * All pointers must be valid; `budget_exhausted` may be NULL.
 */
enum MecflStatus mecfl_solve_gamma(const struct MecflSpec *spec,
                                   const struct MecflUser *user,
                                   const struct MecflUserAllocation *alloc,
                                   size_t weight_dim,
                                   double *gamma,
                                   bool *budget_exhausted);

/**
 * Offload-fraction best response of user `index` among `n` users.
 *
 * # Safety
 * `users` and `allocs` must hold `n` entries; `lambda_offload` is NULL or
 * holds `n` entries; `delta` must be writable.
 */
enum MecflStatus mecfl_solve_delta(const struct MecflSpec *spec,
                                   const struct MecflUser *users,
                                   const struct MecflUserAllocation *allocs,
                                   size_t n,
                                   size_t index,
                                   size_t weight_dim,
                                   double *delta);

/**
 * Bandwidth shares for all `n` users. `lambda_offload` may be NULL (0.5).
 *
 * # Safety
 * Array arguments must hold `n` entries; `uplink_offload` and
 * `uplink_weight` must each have room for `n` doubles.
 */
enum MecflStatus mecfl_solve_uplink(const struct MecflSpec *spec,
                                    const struct MecflUser *users,
                                    const struct MecflUserAllocation *allocs,
                                    const double *lambda_offload,
                                    size_t n,
                                    size_t weight_dim,
                                    double *uplink_offload,
                                    double *uplink_weight);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MECFL_H */
