/* Generated by cbindgen; do not edit. */

#ifndef SEQGAUSS_H
#define SEQGAUSS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SgRegime {
  SG_REGIME_CHI = 0,
  SG_REGIME_XI = 1,
} SgRegime;

typedef enum SgStatistic {
  SG_STATISTIC_SEQ = 0,
  SG_STATISTIC_CUSUM = 1,
} SgStatistic;

typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_INVALID_INPUT = 1,
  SG_STATUS_NOT_PSD = 2,
  SG_STATUS_NUMERICAL = 3,
  SG_STATUS_IO = 4,
  SG_STATUS_NULL_POINTER = 5,
  SG_STATUS_PANIC = 6,
} SgStatus;

/**
 * Opaque cumulative covariance process `Q(0..n)`.
 */
typedef struct SgCovProcess SgCovProcess;

/**
 * Opaque `n x d` data matrix.
 */
typedef struct SgMatrix SgMatrix;

/**
 * Options of [`sg_run_test`]. Use [`sg_test_options_default`] and
 * override fields; NaN offsets and a zero bandwidth select the defaults.
 */
typedef struct SgTestOptions {
  enum SgStatistic statistic;
  double alpha;
  double tau;
  double nu;
  size_t bandwidth;
  size_t mc_reps;
  uint64_t seed;
  bool center;
} SgTestOptions;

typedef struct SgTestResult {
  double value;
  double quantile;
  double threshold;
  double tau;
  double nu;
  size_t bandwidth;
  bool reject;
} SgTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sg_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *sg_last_error_message(void);

/**
 * Releases a string returned by the library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void sg_string_free(char *s);

/**
 * # Safety
 * The out pointer must be NULL or writable.
 */
enum SgStatus sg_rate_chi(double q, double beta, double *out_rate);

/**
 * # Safety
 * The out pointer must be NULL or writable.
 */
enum SgStatus sg_rate_xi(double q, double beta, double *out_rate);

/**
 * # Safety
 * The out pointer must be NULL or writable.
 */
enum SgStatus sg_block_size(double q,
                            double beta,
                            size_t n,
                            size_t d,
                            enum SgRegime regime,
                            size_t *out_len);

/**
 * Copies `rows * cols` doubles (row-major) into a new matrix handle.
 *
 * # Safety
 * `data` must point to `rows * cols` readable doubles.
 */
enum SgStatus sg_matrix_new(size_t rows,
                            size_t cols,
                            const double *data,
                            struct SgMatrix **out_matrix);

/**
 * # Safety
 * `m` must be a live handle or NULL.
 */
size_t sg_matrix_rows(const struct SgMatrix *m);

/**
 * # Safety
 * `m` must be a live handle or NULL.
 */
size_t sg_matrix_cols(const struct SgMatrix *m);

/**
 * Copies the matrix into `buf`, which must hold `len >= rows * cols`
 * doubles.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum SgStatus sg_matrix_copy(const struct SgMatrix *m, double *buf, size_t len);

/**
 * # Safety
 * `m` must be a handle from this library or NULL; it is invalid afterwards.
 */
void sg_matrix_free(struct SgMatrix *m);

/**
 * Simulates `n` steps of a kernel. `kernel` is a demo name (`iid`, `ma1`,
 * `lipschitz`, `jump`, `categorical`), a path to a kernel JSON file, or an
 * inline JSON spec. `d = 0` keeps the kernel's own dimension.
 *
 * # Safety
 * `kernel` must be a NUL-terminated string.
 */
enum SgStatus sg_simulate(const char *kernel,
                          size_t n,
                          size_t d,
                          uint64_t seed,
                          struct SgMatrix **out_matrix);

/**
 * Value of the sequential or CUSUM statistic.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SgStatus sg_statistic(const struct SgMatrix *m, enum SgStatistic stat, double *out_value);

/**
 * Window estimator of the cumulative long-run covariance; `bandwidth = 0`
 * uses `ceil(n^(1/3))`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SgStatus sg_qhat(const struct SgMatrix *m,
                      size_t bandwidth,
                      bool center,
                      struct SgCovProcess **out_cov);

/**
 * Builds a process from `n` increments of size `d x d` (row-major,
 * concatenated). Increments must be PSD.
 *
 * # Safety
 * `data` must point to `n * d * d` readable doubles.
 */
enum SgStatus sg_cov_from_increments(size_t n,
                                     size_t d,
                                     const double *data,
                                     struct SgCovProcess **out_cov);

/**
 * # Safety
 * `q` must be a live handle or NULL.
 */
size_t sg_cov_len(const struct SgCovProcess *q);

/**
 * # Safety
 * `q` must be a live handle or NULL.
 */
size_t sg_cov_dim(const struct SgCovProcess *q);

/**
 * Writes `Q(k)`, `0 <= k <= n`, as a dense `d x d` array.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum SgStatus sg_cov_at(const struct SgCovProcess *q, size_t k, double *buf, size_t len);

/**
 * # Safety
 * `q` must be a handle from this library or NULL; it is invalid afterwards.
 */
void sg_cov_free(struct SgCovProcess *q);

/**
 * Monte-Carlo `(1 - alpha)` quantile of the statistic under independent
 * Gaussian increments of `q`. Deterministic in `seed`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SgStatus sg_quantile_mc(const struct SgCovProcess *q,
                             enum SgStatistic stat,
                             double alpha,
                             size_t reps,
                             uint64_t seed,
                             double *out_quantile);

struct SgTestOptions sg_test_options_default(void);

/**
 * Runs the offset test on the data. `options` may be NULL for defaults.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SgStatus sg_run_test(const struct SgMatrix *m,
                          const struct SgTestOptions *options,
                          struct SgTestResult *out_result);

/**
 * Like [`sg_run_test`] but returns the full report as JSON; release it
 * with [`sg_string_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum SgStatus sg_run_test_json(const struct SgMatrix *m,
                               const struct SgTestOptions *options,
                               char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEQGAUSS_H */
