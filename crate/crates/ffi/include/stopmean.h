#ifndef STOPMEAN_H
#define STOPMEAN_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. The first four match the CLI exit codes.
 */
typedef enum StopmeanStatus {
  STOPMEAN_STATUS_OK = 0,
  STOPMEAN_STATUS_ERROR = 1,
  STOPMEAN_STATUS_BUDGET_EXHAUSTED = 2,
  STOPMEAN_STATUS_INVARIANT_VIOLATION = 3,
  STOPMEAN_STATUS_NULL_POINTER = 4,
  STOPMEAN_STATUS_INVALID_ARGUMENT = 5,
  STOPMEAN_STATUS_IO = 6,
  STOPMEAN_STATUS_PANIC = 7,
} StopmeanStatus;

/**
 * Which matching rule an estimator uses.
 */
typedef enum StopmeanVariant {
  /**
   * Match quantized blocks and average cell representatives.
   */
  STOPMEAN_VARIANT_QUANTIZED = 0,
  /**
   * Match raw values and average raw values.
   */
  STOPMEAN_VARIANT_EXACT = 1,
} StopmeanVariant;

/**
 * Opaque streaming estimator.
 */
typedef struct StopmeanEstimator StopmeanEstimator;

/**
 * Opaque seeded source.
 */
typedef struct StopmeanSource StopmeanSource;

/**
 * A sample value. When `exact` is set the value is `mantissa * 2^exponent`
 * and `approx` is its nearest double (possibly 0 after underflow);
 * otherwise only `approx` is meaningful.
 */
typedef struct StopmeanValue {
  bool exact;
  int64_t mantissa;
  int64_t exponent;
  double approx;
} StopmeanValue;

/**
 * A completed level: `lambda` is the stopping time and `estimate` is `m_level`.
 */
typedef struct StopmeanCompletion {
  uint64_t level;
  uint64_t lambda;
  double estimate;
} StopmeanCompletion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *stopmean_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *stopmean_version(void);

/**
 * Create a source from a JSON spec such as `{"kind":"counterexample"}`.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum StopmeanStatus stopmean_source_new(const char *spec_json,
                                        uint64_t seed,
                                        struct StopmeanSource **out);

/**
 * Draw the next sample. The first call yields `X_0`.
 *
 * # Safety
 * `source` must come from [`stopmean_source_new`]; `out` must be valid.
 */
enum StopmeanStatus stopmean_source_next(struct StopmeanSource *source, struct StopmeanValue *out);

/**
 * `E(X_{lambda+1} | X_0 ..= X_lambda)` for the samples drawn so far.
 *
 * # Safety
 * `source` must come from [`stopmean_source_new`]; `out` must be valid.
 */
enum StopmeanStatus stopmean_source_oracle_stop(const struct StopmeanSource *source,
                                                uint64_t lambda,
                                                double *out);

/**
 * # Safety
 * `source` must come from [`stopmean_source_new`] or be null.
 */
void stopmean_source_free(struct StopmeanSource *source);

/**
 * Create an estimator. `max_level == 0` means no level cap.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum StopmeanStatus stopmean_estimator_new(enum StopmeanVariant variant,
                                           uint64_t max_level,
                                           struct StopmeanEstimator **out);

/**
 * Feed one sample. `*completed` is set when this sample finishes a level,
 * in which case `*completion` (if non-null) receives it.
 *
 * # Safety
 * `estimator` must come from [`stopmean_estimator_new`]; `completed` must be
 * valid; `completion` may be null.
 */
enum StopmeanStatus stopmean_estimator_step(struct StopmeanEstimator *estimator,
                                            struct StopmeanValue value,
                                            bool *completed,
                                            struct StopmeanCompletion *completion);

/**
 * Number of levels completed so far; 0 for a null handle.
 *
 * # Safety
 * `estimator` must come from [`stopmean_estimator_new`] or be null.
 */
uint64_t stopmean_estimator_completed_levels(const struct StopmeanEstimator *estimator);

/**
 * Completion record for `level` (1-based).
 *
 * # Safety
 * `estimator` must come from [`stopmean_estimator_new`]; `out` must be valid.
 */
enum StopmeanStatus stopmean_estimator_completion(const struct StopmeanEstimator *estimator,
                                                  uint64_t level,
                                                  struct StopmeanCompletion *out);

/**
 * # Safety
 * `estimator` must come from [`stopmean_estimator_new`] or be null.
 */
void stopmean_estimator_free(struct StopmeanEstimator *estimator);

/**
 * Run an experiment config (JSON text) and write its outputs to `out_dir`.
 *
 * # Safety
 * Both arguments must be NUL-terminated strings.
 */
enum StopmeanStatus stopmean_run_config(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STOPMEAN_H */
