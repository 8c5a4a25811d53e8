/* C interface of the esfd gradient-estimator library. */

#ifndef ESFD_H
#define ESFD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an esfd call.
 */
typedef enum EsfdStatus {
  /**
   * Success.
   */
  ESFD_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  ESFD_STATUS_NULL_ARGUMENT = 1,
  /**
   * Arguments were structurally invalid (unknown name, size mismatch).
   */
  ESFD_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A value lay outside the mathematical domain of the operation.
   */
  ESFD_STATUS_DOMAIN_ERROR = 3,
  /**
   * The objective produced a non-finite value.
   */
  ESFD_STATUS_EVALUATION_ERROR = 4,
  /**
   * An internal cross-check between two computation routes failed.
   */
  ESFD_STATUS_CONSISTENCY_ERROR = 5,
} EsfdStatus;

/**
 * Which gradient expression to evaluate.
 */
typedef enum EsfdEstimator {
  /**
   * Finite differences.
   */
  ESFD_ESTIMATOR_FD = 0,
  /**
   * Evolution strategies (raw value weighting).
   */
  ESFD_ESTIMATOR_ES = 1,
  /**
   * Finite differences rescaled by the squared mean perturbation norm.
   */
  ESFD_ESTIMATOR_SCALED_FD = 2,
  /**
   * Central sum (value differences without the norm weighting).
   */
  ESFD_ESTIMATOR_CENTRAL_SUM = 3,
} EsfdEstimator;

/**
 * Opaque perturbation-batch handle.
 */
typedef struct EsfdBatch EsfdBatch;

/**
 * Opaque objective handle.
 */
typedef struct EsfdObjective EsfdObjective;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the current thread's last error message into `buffer` as a
 * NUL-terminated string, truncating to `length` bytes. Returns the full
 * message length (excluding the NUL), so callers can detect truncation.
 * A null or zero-length buffer only queries the length.
 *
 * # Safety
 * `buffer`, when non-null, must point to `length` writable bytes.
 */
size_t esfd_last_error_message(char *buffer, size_t length);

/**
 * Mean of `||N(0, sigma^2 I_n)||`.
 *
 * # Safety
 * `out_mean` must be a valid writable pointer.
 */
enum EsfdStatus esfd_chi_mean(uint64_t n, double sigma, double *out_mean);

/**
 * Variance of `||N(0, sigma^2 I_n)||`.
 *
 * # Safety
 * `out_variance` must be a valid writable pointer.
 */
enum EsfdStatus esfd_chi_variance(uint64_t n, double sigma, double *out_variance);

/**
 * `Gamma(numerator_arg) / Gamma(denominator_arg)` via log-Gamma
 * differencing (no intermediate overflow for large arguments).
 *
 * # Safety
 * `out_ratio` must be a valid writable pointer.
 */
enum EsfdStatus esfd_gamma_ratio_exact(double numerator_arg,
                                       double denominator_arg,
                                       double *out_ratio);

/**
 * First-order asymptotic `Gamma(z+a)/Gamma(z+b)`.
 *
 * # Safety
 * `out_ratio` must be a valid writable pointer.
 */
enum EsfdStatus esfd_gamma_ratio_asymptotic(double z, double a, double b, double *out_ratio);

/**
 * Creates an objective from a family name (`constant`, `linear`,
 * `sphere`, `quadratic`, `rosenbrock`), a dimension, and optional
 * parallel name/value parameter arrays.
 *
 * # Safety
 * `name` must be a NUL-terminated string; the parameter arrays, when
 * `parameter_count > 0`, must both hold `parameter_count` entries.
 */
enum EsfdStatus esfd_objective_new(const char *name,
                                   size_t dim,
                                   const char *const *parameter_names,
                                   const double *parameter_values,
                                   size_t parameter_count,
                                   struct EsfdObjective **out_objective);

/**
 * Releases an objective handle. Null is a no-op.
 *
 * # Safety
 * `objective` must have come from `esfd_objective_new` and not have
 * been freed before.
 */
void esfd_objective_free(struct EsfdObjective *objective);

/**
 * Dimension of an objective (0 for null).
 *
 * # Safety
 * `objective` must be a live handle or null.
 */
size_t esfd_objective_dim(const struct EsfdObjective *objective);

/**
 * Evaluates `R(x)`; `x` must hold the objective's dimension.
 *
 * # Safety
 * Pointer arguments must be live and correctly sized.
 */
enum EsfdStatus esfd_objective_evaluate(const struct EsfdObjective *objective,
                                        const double *x,
                                        size_t dim,
                                        double *out_value);

/**
 * Writes the analytic gradient of `R` at `x` into `out_gradient`
 * (`dim` entries).
 *
 * # Safety
 * Pointer arguments must be live and correctly sized.
 */
enum EsfdStatus esfd_objective_gradient(const struct EsfdObjective *objective,
                                        const double *x,
                                        size_t dim,
                                        double *out_gradient);

/**
 * Draws `lambda` perturbations from `N(0, sigma^2 I)` around `theta`
 * (`dim` entries), deterministically in `seed`.
 *
 * # Safety
 * `theta` must hold `dim` entries; `out_batch` must be writable.
 */
enum EsfdStatus esfd_batch_sample(const double *theta,
                                  size_t dim,
                                  double sigma,
                                  size_t lambda,
                                  uint64_t seed,
                                  struct EsfdBatch **out_batch);

/**
 * Builds the mirrored (antithetic) companion of a batch: each
 * perturbation followed by its negation, `2 lambda` samples in total.
 *
 * # Safety
 * `batch` must be a live handle; `out_batch` must be writable.
 */
enum EsfdStatus esfd_batch_mirror(const struct EsfdBatch *batch, struct EsfdBatch **out_batch);

/**
 * Releases a batch handle. Null is a no-op.
 *
 * # Safety
 * `batch` must have come from a batch constructor and not have been
 * freed before.
 */
void esfd_batch_free(struct EsfdBatch *batch);

/**
 * Batch dimension (0 for null).
 *
 * # Safety
 * `batch` must be a live handle or null.
 */
size_t esfd_batch_dim(const struct EsfdBatch *batch);

/**
 * Batch population size (0 for null).
 *
 * # Safety
 * `batch` must be a live handle or null.
 */
size_t esfd_batch_lambda(const struct EsfdBatch *batch);

/**
 * Evaluates one gradient estimate on a batch.
 *
 * `out_vector` must hold the batch dimension. `normalize_es` applies
 * the conventional `1/sigma^2` factor to the ES estimate (ignored by
 * the other kinds). `out_r_theta`, when non-null, receives `R(theta)`.
 *
 * # Safety
 * Handles must be live; `out_vector` must hold `esfd_batch_dim(batch)`
 * entries.
 */
enum EsfdStatus esfd_gradient_estimate(const struct EsfdBatch *batch,
                                       const struct EsfdObjective *objective,
                                       enum EsfdEstimator kind,
                                       bool normalize_es,
                                       double *out_vector,
                                       double *out_r_theta);

/**
 * The exact difference `central_sum - es` via its closed form, with the
 * internal dual-route consistency check.
 *
 * # Safety
 * Handles must be live; `out_vector` must hold `esfd_batch_dim(batch)`
 * entries.
 */
enum EsfdStatus esfd_gradient_difference(const struct EsfdBatch *batch,
                                         const struct EsfdObjective *objective,
                                         double *out_vector);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ESFD_H */
