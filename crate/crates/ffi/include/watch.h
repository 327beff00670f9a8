#ifndef WATCH_H
#define WATCH_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes returned by every fallible function.
 */
typedef enum WatchStatus {
  WATCH_STATUS_OK = 0,
  WATCH_STATUS_NULL_ARGUMENT = 1,
  WATCH_STATUS_INVALID_UTF8 = 2,
  WATCH_STATUS_CONFIG = 3,
  WATCH_STATUS_DATA = 4,
  WATCH_STATUS_IO = 5,
  WATCH_STATUS_NUMERICAL = 6,
  WATCH_STATUS_PANIC = 7,
} WatchStatus;

/*
 Verbal evidence category, weakest first.
 */
typedef enum WatchVerbal {
  WATCH_VERBAL_LOW = 0,
  WATCH_VERBAL_MODERATE = 1,
  WATCH_VERBAL_NOTEWORTHY = 2,
  WATCH_VERBAL_STRONG = 3,
  WATCH_VERBAL_VERY_STRONG = 4,
} WatchVerbal;

/*
 Opaque loaded dataset.
 */
typedef struct WatchDataset WatchDataset;

/*
 Opaque findings of an `analyze` run.
 */
typedef struct WatchFindings WatchFindings;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *watch_last_error(void);

/*
 Free a string returned by this library.

 # Safety
 `s` must come from this library and not have been freed.
 */
void watch_string_free(char *s);

/*
 Load a CSV with roles bound from an analysis-plan JSON string.

 # Safety
 String arguments must be NUL-terminated; `out` must be writable.
 */
enum WatchStatus watch_dataset_load(const char *csv_path,
                                    const char *plan_json,
                                    struct WatchDataset **out);

/*
 Number of rows, or 0 for a null handle.

 # Safety
 `ds` must be null or a live handle.
 */
size_t watch_dataset_n_rows(const struct WatchDataset *ds);

/*
 Number of covariates, or 0 for a null handle.

 # Safety
 `ds` must be null or a live handle.
 */
size_t watch_dataset_n_covariates(const struct WatchDataset *ds);

/*
 # Safety
 `ds` must be null or a handle not yet freed.
 */
void watch_dataset_free(struct WatchDataset *ds);

/*
 Global homogeneity test on the dataset's covariates against supplied
 pseudo-outcomes (`n_rows` values).

 # Safety
 `phi` must point to `n` doubles; output pointers must be writable.
 */
enum WatchStatus watch_global_test(const struct WatchDataset *ds,
                                   const double *phi,
                                   size_t n,
                                   size_t n_permutations,
                                   uint64_t seed,
                                   double *out_p_value,
                                   enum WatchVerbal *out_verbal);

/*
 Global test on a dense column-major `n x p` matrix of continuous
 covariates.

 # Safety
 `x` must point to `n * p` doubles and `phi` to `n`; output pointers must
 be writable.
 */
enum WatchStatus watch_global_test_dense(const double *x,
                                         size_t n,
                                         size_t p,
                                         const double *phi,
                                         size_t n_permutations,
                                         uint64_t seed,
                                         double *out_p_value,
                                         double *out_statistic);

/*
 Verbal category for a p-value in (0, 1].

 # Safety
 `out` must be writable.
 */
enum WatchStatus watch_verbal_category(double p_value, enum WatchVerbal *out);

/*
 Run `analyze` for a config file, writing outputs to `out_dir`.

 # Safety
 String arguments must be NUL-terminated; `out` must be writable.
 */
enum WatchStatus watch_analyze_run(const char *config_path,
                                   const char *out_dir,
                                   struct WatchFindings **out);

/*
 Global p-value of a findings handle, NaN for null.

 # Safety
 `f` must be null or a live handle.
 */
double watch_findings_p_value(const struct WatchFindings *f);

/*
 Findings as JSON; free with `watch_string_free`. Null on failure.

 # Safety
 `f` must be null or a live handle.
 */
char *watch_findings_json(const struct WatchFindings *f);

/*
 # Safety
 `f` must be null or a handle not yet freed.
 */
void watch_findings_free(struct WatchFindings *f);

/*
 Generate a synthetic trial from a scenario JSON string into `out_dir`.

 # Safety
 String arguments must be NUL-terminated.
 */
enum WatchStatus watch_simulate(const char *scenario_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WATCH_H */
