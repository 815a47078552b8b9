#ifndef COMPDET_H
#define COMPDET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CdetStatus {
  CDET_STATUS_OK = 0,
  CDET_STATUS_NULL_POINTER = 1,
  CDET_STATUS_INVALID_INPUT = 2,
  CDET_STATUS_SHAPE = 3,
  CDET_STATUS_NOT_POSITIVE_DEFINITE = 4,
  CDET_STATUS_BACKGROUND_TOO_STRONG = 5,
  CDET_STATUS_INFEASIBLE = 6,
  CDET_STATUS_IO = 7,
  CDET_STATUS_PARSE = 8,
  CDET_STATUS_PANIC = 9,
} CdetStatus;

/**
 * Opaque target dictionary.
 */
typedef struct CdetDictionary CdetDictionary;

/**
 * Opaque sensing plan (projection, whitener and background).
 */
typedef struct CdetSensingPlan CdetSensingPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `len` bytes, into `buf`. Returns the full message length in
 * bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes of writes.
 */
size_t cdet_last_error(char *buf, size_t len);

/**
 * Builds a dictionary from `m` unit-norm targets of length `n`, stored as
 * the rows of `targets`. `priors` may be null for equal priors.
 *
 * # Safety
 * `targets` must hold `m * n` doubles, `priors` null or `m` doubles, and
 * `out` must be valid for writes.
 */
enum CdetStatus cdet_dictionary_new(const double *targets,
                                    size_t m,
                                    size_t n,
                                    const double *priors,
                                    struct CdetDictionary **out);

/**
 * Loads a dictionary from a JSON file written by `compdet gen-dict`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writes.
 */
enum CdetStatus cdet_dictionary_load(const char *path, struct CdetDictionary **out);

/**
 * # Safety
 * `dict` must be null or a handle from this library that was not freed.
 */
void cdet_dictionary_free(struct CdetDictionary *dict);

/**
 * Number of targets and their length.
 *
 * # Safety
 * Pointers must be valid; `dict` a live handle.
 */
enum CdetStatus cdet_dictionary_dims(const struct CdetDictionary *dict, size_t *m, size_t *n);

/**
 * Minimum pairwise target distance and the extreme priors.
 *
 * # Safety
 * Pointers must be valid; `dict` a live handle.
 */
enum CdetStatus cdet_dictionary_stats(const struct CdetDictionary *dict,
                                      double *d_min,
                                      double *p_min,
                                      double *p_max);

/**
 * Designed plan for a given `k x n` matrix `a`, background covariance
 * `cov` (`n x n`, null for none), mean (null for zero) and sensor noise
 * variance.
 *
 * # Safety
 * Buffers must hold the stated number of doubles; `out` valid for writes.
 */
enum CdetStatus cdet_plan_designed(const double *a,
                                   size_t k,
                                   size_t n,
                                   const double *cov,
                                   const double *mean,
                                   double sensor_variance,
                                   struct CdetSensingPlan **out);

/**
 * Designed plan with `a` drawn as Gaussian with variance `1/k` from `seed`.
 *
 * # Safety
 * As for [`cdet_plan_designed`].
 */
enum CdetStatus cdet_plan_designed_seeded(size_t k,
                                          size_t n,
                                          uint64_t seed,
                                          const double *cov,
                                          const double *mean,
                                          double sensor_variance,
                                          struct CdetSensingPlan **out);

/**
 * # Safety
 * `plan` must be null or a live handle.
 */
void cdet_plan_free(struct CdetSensingPlan *plan);

/**
 * Number of measurements `k` and signal length `n`.
 *
 * # Safety
 * Pointers must be valid; `plan` a live handle.
 */
enum CdetStatus cdet_plan_dims(const struct CdetSensingPlan *plan, size_t *k, size_t *n);

/**
 * Copies the sensing matrix `phi` (`k x n`, row-major) into `out`.
 *
 * # Safety
 * `out` must hold `k * n` doubles.
 */
enum CdetStatus cdet_plan_phi(const struct CdetSensingPlan *plan, double *out);

/**
 * Whitens a raw measurement `z` (length `k`) into `out` (length `k`),
 * removing the projected background mean.
 *
 * # Safety
 * `z` and `out` must hold `k` doubles each.
 */
enum CdetStatus cdet_plan_whiten(const struct CdetSensingPlan *plan, const double *z, double *out);

/**
 * MAP label of a whitened measurement `y` (length `k`) at known strength
 * `alpha`.
 *
 * # Safety
 * Handles must be live; `y` must hold `k` doubles.
 */
enum CdetStatus cdet_classify_map(const struct CdetSensingPlan *plan,
                                  const struct CdetDictionary *dict,
                                  const double *y,
                                  double alpha,
                                  size_t *label);

/**
 * Noncentral chi-squared CDF with `k` degrees of freedom.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum CdetStatus cdet_noncentral_chisq_cdf(double x, uint32_t k, double nc, double *out);

/**
 * Upper bound on the p-value of the anomaly statistic `d`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum CdetStatus cdet_anomaly_pvalue_bound(double d,
                                          size_t k,
                                          double alpha_hat,
                                          double tau,
                                          double epsilon,
                                          double zeta,
                                          double *out);

/**
 * Benjamini-Hochberg at level `delta`. Writes 1 into `rejected[i]` for each
 * rejected hypothesis and 0 otherwise, and the rejection count into
 * `count`.
 *
 * # Safety
 * `pvalues` must hold `m` doubles, `rejected` `m` bytes.
 */
enum CdetStatus cdet_bh(const double *pvalues,
                        size_t m,
                        double delta,
                        uint8_t *rejected,
                        size_t *count);

/**
 * Achievable worst-case pFDR bound. `conditions_ok` receives 1 when every
 * sufficient condition of the bound holds (otherwise the value is 1).
 *
 * # Safety
 * Output pointers must be valid for writes.
 */
enum CdetStatus cdet_achievable_pfdr_bound(size_t k,
                                           size_t n,
                                           double alpha_min,
                                           double d_min,
                                           double p_min,
                                           double p_max,
                                           double epsilon,
                                           double lambda_max,
                                           double *value,
                                           uint8_t *conditions_ok);

/**
 * Smallest measurement count meeting the measurement-count condition.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum CdetStatus cdet_min_measurements(double alpha_min,
                                      double d_min,
                                      double p_min,
                                      double p_max,
                                      size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COMPDET_H */
