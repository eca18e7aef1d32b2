#ifndef SLEEPNET_H
#define SLEEPNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SleepnetStatus {
  SLEEPNET_STATUS_OK = 0,
  SLEEPNET_STATUS_NULL_POINTER = 1,
  SLEEPNET_STATUS_INVALID_ARGUMENT = 2,
  SLEEPNET_STATUS_NO_SLEEP = 3,
  SLEEPNET_STATUS_NUMERIC_FAILURE = 4,
  SLEEPNET_STATUS_TOO_FEW_SAMPLES = 5,
  SLEEPNET_STATUS_PANIC = 6,
} SleepnetStatus;

typedef enum SleepnetFidelity {
  SLEEPNET_FIDELITY_PAPER = 0,
  SLEEPNET_FIDELITY_CORRECTED = 1,
} SleepnetFidelity;

/**
 * Opaque analytic model built from a parameter set.
 */
typedef struct SleepnetModel SleepnetModel;

/**
 * Opaque parameter set.
 */
typedef struct SleepnetParams SleepnetParams;

/**
 * Opaque renewal-cycle sampler with running totals.
 */
typedef struct SleepnetSimulation SleepnetSimulation;

/**
 * Analytic figures of one parameter set. Lengths in m, times in s, powers in W.
 */
typedef struct SleepnetFigures {
  double expected_gap;
  double prob_sleep;
  /**
   * NaN when the base station never sleeps.
   */
  double expected_sleep_time;
  double expected_power_saved;
  double expected_power_saved_clamped;
  double baseline_power_saved;
} SleepnetFigures;

typedef struct SleepnetEstimate {
  double value;
  double std_error;
} SleepnetEstimate;

/**
 * Monte Carlo figures; `expected_sleep_time` is NaN when no cycle slept.
 */
typedef struct SleepnetSimulationFigures {
  uint64_t n_cycles;
  struct SleepnetEstimate expected_gap;
  struct SleepnetEstimate prob_sleep;
  struct SleepnetEstimate expected_sleep_time;
  struct SleepnetEstimate expected_power_saved;
  struct SleepnetEstimate expected_power_saved_clamped;
} SleepnetSimulationFigures;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *sleepnet_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sleepnet_version(void);

/**
 * Creates a parameter set. Speeds in m/s; `fidelity` is a `SleepnetFidelity`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SleepnetStatus sleepnet_params_new(double rho,
                                        double r0,
                                        double d,
                                        double a_mps,
                                        double b_mps,
                                        double p0,
                                        double ec,
                                        uint32_t fidelity,
                                        struct SleepnetParams **out);

/**
 * Canonical parameters (D = 800 m, r0 = 200 m, 40 to 80 km/h, P0 = 1 kW,
 * Ec = 10 J) at density `rho`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SleepnetStatus sleepnet_params_canonical(double rho,
                                              uint32_t fidelity,
                                              struct SleepnetParams **out);

/**
 * # Safety
 * `params` must come from this library and not be used afterwards. NULL is ignored.
 */
void sleepnet_params_free(struct SleepnetParams *params);

/**
 * Builds the head-gap law and its energy figures.
 *
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum SleepnetStatus sleepnet_model_new(const struct SleepnetParams *params,
                                       struct SleepnetModel **out);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards. NULL is ignored.
 */
void sleepnet_model_free(struct SleepnetModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum SleepnetStatus sleepnet_model_figures(const struct SleepnetModel *model,
                                           struct SleepnetFigures *out);

/**
 * Head-gap density at `x` metres.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum SleepnetStatus sleepnet_model_pdf(const struct SleepnetModel *model, double x, double *out);

/**
 * Head-gap distribution function at `x` metres.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum SleepnetStatus sleepnet_model_cdf(const struct SleepnetModel *model, double x, double *out);

/**
 * Renewal-cycle sampler drawing from stream `stream` of `seed`.
 *
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum SleepnetStatus sleepnet_simulation_new(const struct SleepnetParams *params,
                                            uint32_t fidelity,
                                            uint64_t seed,
                                            uint64_t stream,
                                            struct SleepnetSimulation **out);

/**
 * # Safety
 * `sim` must come from this library and not be used afterwards. NULL is ignored.
 */
void sleepnet_simulation_free(struct SleepnetSimulation *sim);

/**
 * Draws `n_cycles` more cycles into the running totals.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum SleepnetStatus sleepnet_simulation_run(struct SleepnetSimulation *sim, uint64_t n_cycles);

/**
 * Estimates from every cycle drawn so far.
 *
 * # Safety
 * `sim` must be a live handle and `out` valid for writes.
 */
enum SleepnetStatus sleepnet_simulation_figures(const struct SleepnetSimulation *sim,
                                                struct SleepnetSimulationFigures *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLEEPNET_H */
