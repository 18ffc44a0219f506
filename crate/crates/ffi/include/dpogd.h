#ifndef DPOGD_H
#define DPOGD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum DpogdStatus {
  DPOGD_STATUS_OK = 0,
  DPOGD_STATUS_NULL_POINTER = 1,
  DPOGD_STATUS_INVALID_ARGUMENT = 2,
  DPOGD_STATUS_CONFIG = 3,
  DPOGD_STATUS_DIVERGENCE = 4,
  DPOGD_STATUS_ORACLE_FAILURE = 5,
  DPOGD_STATUS_IO = 6,
  DPOGD_STATUS_OUT_OF_RANGE = 7,
  DPOGD_STATUS_INTERNAL = 8,
  DPOGD_STATUS_PANIC = 9,
} DpogdStatus;

/**
 * Opaque validated experiment configuration.
 */
typedef struct DpogdConfig DpogdConfig;

/**
 * Opaque experiment result.
 */
typedef struct DpogdResult DpogdResult;

/**
 * Opaque consensus schedule.
 */
typedef struct DpogdSchedule DpogdSchedule;

/**
 * Plain copy of the contraction constants.
 */
typedef struct DpogdContraction {
  double eta;
  size_t b;
  size_t nodes;
  double omega;
  double big_gamma;
  double gamma;
  double log_gamma;
} DpogdContraction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *dpogd_last_error(void);

/**
 * Clears the message returned by [`dpogd_last_error`].
 */
void dpogd_clear_error(void);

/**
 * Static name of a status code.
 */
const char *dpogd_status_name(enum DpogdStatus status);

/**
 * `S(k) = ⌊T^u⌋`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum DpogdStatus dpogd_schedule_constant(double u, size_t horizon, struct DpogdSchedule **out);

/**
 * `S(k) = ⌊c ln k⌋`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum DpogdStatus dpogd_schedule_logarithmic(double c, size_t horizon, struct DpogdSchedule **out);

/**
 * Explicit `S(k)` list; the last entry repeats.
 *
 * # Safety
 * `steps` must point to `len` values and `out` must be valid.
 */
enum DpogdStatus dpogd_schedule_explicit(const size_t *steps,
                                         size_t len,
                                         size_t horizon,
                                         struct DpogdSchedule **out);

/**
 * Number of iterations `K` that fit the horizon.
 *
 * # Safety
 * `s` must be a live schedule handle or null.
 */
size_t dpogd_schedule_iterations(const struct DpogdSchedule *s);

/**
 * Sample time `t_k` and consensus count `S(k)` of iteration `k` (1-based).
 *
 * # Safety
 * Pointers must be valid.
 */
enum DpogdStatus dpogd_schedule_iteration(const struct DpogdSchedule *s,
                                          size_t k,
                                          size_t *sample_time,
                                          size_t *steps);

/**
 * # Safety
 * `s` must be a handle from a `dpogd_schedule_*` constructor or null.
 */
void dpogd_schedule_free(struct DpogdSchedule *s);

/**
 * `(Γ, γ)` for weight floor `eta`, `nodes` agents and window `b`.
 *
 * # Safety
 * `out` must be valid.
 */
enum DpogdStatus dpogd_contraction(double eta,
                                   size_t nodes,
                                   size_t b,
                                   struct DpogdContraction *out);

/**
 * `Γ γ^{s−1}`.
 */
double dpogd_contraction_bound(struct DpogdContraction c, size_t s);

/**
 * Proximal map of `α(σ‖·‖₁ + ι_{‖·‖≤R})` applied to `x[0..n]`, written to
 * `out[0..n]`. Pass `radius = INFINITY` for no ball.
 *
 * # Safety
 * `x` and `out` must point to `n` values.
 */
enum DpogdStatus dpogd_prox(const double *x,
                            size_t n,
                            double alpha,
                            double sigma,
                            double radius,
                            double *out);

/**
 * Parses and validates a TOML configuration.
 *
 * # Safety
 * `toml` must be a nul-terminated string and `out` valid.
 */
enum DpogdStatus dpogd_config_parse(const char *toml, struct DpogdConfig **out);

/**
 * Loads a TOML configuration file.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` valid.
 */
enum DpogdStatus dpogd_config_load(const char *path, struct DpogdConfig **out);

/**
 * Replaces the seed list of `cfg`.
 *
 * # Safety
 * `cfg` must be live and `seeds` must point to `len > 0` values.
 */
enum DpogdStatus dpogd_config_set_seeds(struct DpogdConfig *cfg, const uint64_t *seeds, size_t len);

/**
 * # Safety
 * `cfg` must be a handle from `dpogd_config_*` or null.
 */
void dpogd_config_free(struct DpogdConfig *cfg);

/**
 * Runs every configured algorithm on every seed.
 *
 * # Safety
 * `cfg` must be live and `out` valid.
 */
enum DpogdStatus dpogd_experiment_run(const struct DpogdConfig *cfg, struct DpogdResult **out);

/**
 * Number of algorithms in the result.
 *
 * # Safety
 * `r` must be live or null.
 */
size_t dpogd_result_algorithms(const struct DpogdResult *r);

/**
 * Name of algorithm `i`; owned by the result.
 *
 * # Safety
 * `r` must be live or null.
 */
const char *dpogd_result_algorithm_name(const struct DpogdResult *r, size_t i);

/**
 * Median final `Reg_T / T` of algorithm `i`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum DpogdStatus dpogd_result_final_regret(const struct DpogdResult *r, size_t i, double *out);

/**
 * Median final `C_T / T`.
 *
 * # Safety
 * `r` must be live or null.
 */
double dpogd_result_path_over_t(const struct DpogdResult *r);

/**
 * Writes the CSV/JSON bundle under `dir`.
 *
 * # Safety
 * `r` must be live and `dir` nul-terminated.
 */
enum DpogdStatus dpogd_result_write(const struct DpogdResult *r, const char *dir);

/**
 * # Safety
 * `r` must be a handle from [`dpogd_experiment_run`] or null.
 */
void dpogd_result_free(struct DpogdResult *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DPOGD_H */
