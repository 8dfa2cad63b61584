#ifndef RSR_H
#define RSR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  RSR_STATUS_OK = 0,
  RSR_STATUS_NULL_POINTER = 1,
  RSR_STATUS_INVALID_ARGUMENT = 2,
  RSR_STATUS_SHAPE = 3,
  RSR_STATUS_INSUFFICIENT_SAMPLES = 4,
  RSR_STATUS_EPSILON_TOO_LARGE = 5,
  RSR_STATUS_DEGENERATE = 6,
  RSR_STATUS_IO = 7,
  RSR_STATUS_FORMAT = 8,
  RSR_STATUS_PANIC = 99,
} RsrStatus;

/**
 * Opaque dataset handle.
 */
typedef struct RsrDataset RsrDataset;

/**
 * Opaque recovery result handle.
 */
typedef struct RsrRecovery RsrRecovery;

/**
 * Estimator settings. Obtain defaults from [`rsr_config_default`].
 */
typedef struct {
  /**
   * Assumed corruption fraction, at most 0.5.
   */
  double epsilon;
  double delta;
  double c_prime;
  uint64_t t_cap;
  /**
   * Coarse-stage threshold constant, at least 2.2.
   */
  double c;
  double t0;
  /**
   * Nonzero to difference consecutive sample pairs first.
   */
  int32_t pairwise_difference;
} RsrConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *rsr_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *rsr_last_error(void);

/**
 * # Safety
 * `out` must be null or point to writable memory for one `RsrConfig`.
 */
RsrStatus rsr_config_default(RsrConfig *out);

/**
 * Draws a dataset: `r_star`-dimensional Gaussian inliers with unit
 * eigenvalues, isotropic noise of trace `sigma2`, and a fraction `epsilon`
 * replaced by a rank-2 adversary orthogonal to the planted subspace.
 *
 * # Safety
 * `out` must be null or point to writable memory for one pointer.
 */
RsrStatus rsr_dataset_generate(size_t d,
                               size_t n,
                               size_t r_star,
                               double epsilon,
                               double sigma2,
                               uint64_t seed,
                               RsrDataset **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be null or writable.
 */
RsrStatus rsr_dataset_load(const char *path, RsrDataset **out);

/**
 * Writes the container and its `.json` sidecar.
 *
 * # Safety
 * `dataset` must be null or a live handle; `path` a NUL-terminated string.
 */
RsrStatus rsr_dataset_save(const RsrDataset *dataset, const char *path);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void rsr_dataset_free(RsrDataset *dataset);

/**
 * # Safety
 * All pointers must be null or valid; outputs are skipped when null.
 */
RsrStatus rsr_dataset_shape(const RsrDataset *dataset, size_t *d, size_t *n, size_t *r_star);

/**
 * Borrowed pointer to the `d × n` column-major samples, valid while the
 * handle lives. Null for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
const double *rsr_dataset_data(const RsrDataset *dataset);

/**
 * Copies the inlier mask (1 = inlier) into `out`, which holds `len >= n` bytes.
 *
 * # Safety
 * `out` must point to at least `len` writable bytes.
 */
RsrStatus rsr_dataset_copy_mask(const RsrDataset *dataset, uint8_t *out, size_t len);

/**
 * Runs the two-stage estimator on raw column-major data.
 *
 * # Safety
 * `data` must point to `d * n` doubles; `config` and `out` must be valid.
 */
RsrStatus rsr_ransac_plus(const double *data,
                          size_t d,
                          size_t n,
                          double noise_trace,
                          double noise_norm,
                          const RsrConfig *config,
                          uint64_t seed,
                          RsrRecovery **out);

/**
 * Runs the estimator on a dataset handle with its true noise level.
 *
 * # Safety
 * Pointers must be null or valid.
 */
RsrStatus rsr_dataset_recover(const RsrDataset *dataset,
                              const RsrConfig *config,
                              uint64_t seed,
                              RsrRecovery **out);

/**
 * # Safety
 * `recovery` must be null or a handle not yet freed.
 */
void rsr_recovery_free(RsrRecovery *recovery);

/**
 * Ambient dimension, coarse dimension `r̂` and final dimension `r̃`.
 *
 * # Safety
 * Pointers must be null or valid; null outputs are skipped.
 */
RsrStatus rsr_recovery_dims(const RsrRecovery *recovery, size_t *d, size_t *r_hat, size_t *r_tilde);

/**
 * Whether a spectral gap was found and whether the batch count was capped.
 *
 * # Safety
 * Pointers must be null or valid; null outputs are skipped.
 */
RsrStatus rsr_recovery_flags(const RsrRecovery *recovery, int32_t *gap_found, int32_t *capped);

/**
 * Copies the `d × r̃` column-major basis into `out` (`len >= d·r̃`).
 *
 * # Safety
 * `out` must point to at least `len` writable doubles.
 */
RsrStatus rsr_recovery_copy_basis(const RsrRecovery *recovery, double *out, size_t len);

/**
 * Distance between the recovered subspace and a dataset's planted one.
 *
 * # Safety
 * Pointers must be null or valid.
 */
RsrStatus rsr_recovery_error(const RsrRecovery *recovery, const RsrDataset *dataset, double *out);

/**
 * `‖P_A − P_B‖₂` for column-major orthonormal bases `a` (`d × ra`) and
 * `b` (`d × rb`).
 *
 * # Safety
 * `a` and `b` must point to `d·ra` and `d·rb` doubles; `out` must be valid.
 */
RsrStatus rsr_subspace_distance(const double *a,
                                size_t ra,
                                const double *b,
                                size_t rb,
                                size_t d,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RSR_H */
