#ifndef TECHMIX_H
#define TECHMIX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define TM_PRIOR_UIP 0

#define TM_PRIOR_BRIC 1

#define TM_PRIOR_HYPER_UIP 2

#define TM_MODEL_PRIOR_UNIFORM 0

#define TM_MODEL_PRIOR_BETA_BINOMIAL 1

#define TM_SAMPLER_MCMC 0

#define TM_SAMPLER_ENUMERATE 1

typedef enum TmStatus {
  TM_STATUS_OK = 0,
  TM_STATUS_NULL_POINTER = 1,
  TM_STATUS_INVALID_ARGUMENT = 2,
  TM_STATUS_INPUT = 3,
  TM_STATUS_DESIGN = 4,
  TM_STATUS_SINGULAR = 5,
  TM_STATUS_PRECISION = 6,
  TM_STATUS_CAPACITY = 7,
  TM_STATUS_MIXING = 8,
  TM_STATUS_WINDOW = 9,
  TM_STATUS_OTHER = 10,
  TM_STATUS_PANIC = 11,
} TmStatus;

/**
 * Opaque model-averaging result.
 */
typedef struct TmBma TmBma;

/**
 * Opaque average-linkage dendrogram.
 */
typedef struct TmDendrogram TmDendrogram;

/**
 * Opaque regression design.
 */
typedef struct TmDesign TmDesign;

/**
 * Model-averaging settings. Fill with [`tm_bma_default_options`] first.
 */
typedef struct TmBmaOptions {
  int32_t g_prior;
  /**
   * Hyper-g parameter; NaN selects the UIP-matched default.
   */
  double hyper_a;
  int32_t model_prior;
  bool heredity;
  int32_t sampler;
  uint64_t iters;
  uint64_t burnin;
  uint64_t seed;
} TmBmaOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *tm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tm_version(void);

/**
 * DTW distance between two row-major series of `dim`-vectors.
 * A negative `window` leaves the alignment unconstrained.
 *
 * # Safety
 * `a` and `b` must hold `len_a * dim` and `len_b * dim` doubles; `out`
 * must be writable.
 */
enum TmStatus tm_dtw_distance(const double *a,
                              size_t len_a,
                              const double *b,
                              size_t len_b,
                              size_t dim,
                              int64_t window,
                              bool normalize,
                              double *out);

/**
 * Builds a year-demeaned design from `n` outcomes and a column-major
 * `n × k` regressor block. `parents` is null or holds `2k` entries: the
 * two main-effect columns of each interaction column, `-1` for plain
 * columns.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `out` must be writable.
 */
enum TmStatus tm_design_new(const double *y,
                            const double *x,
                            const int32_t *years,
                            size_t n,
                            size_t k,
                            const int64_t *parents,
                            struct TmDesign **out);

/**
 * # Safety
 * `design` must come from [`tm_design_new`] and not be freed twice.
 */
void tm_design_free(struct TmDesign *design);

/**
 * Log marginal likelihood, relative to the null model, of the model with
 * columns `cols`.
 *
 * # Safety
 * `design` must be a live handle, `cols` valid for `n_cols` reads and
 * `out` writable.
 */
enum TmStatus tm_log_marginal_likelihood(const struct TmDesign *design,
                                         const size_t *cols,
                                         size_t n_cols,
                                         int32_t g_prior,
                                         double hyper_a_value,
                                         double *out);

/**
 * Default settings: hyper-g (UIP-matched), beta-binomial model
 * prior, strong heredity, MCMC with 200,000 iterations and 20,000 burn-in.
 *
 * # Safety
 * `out` must be writable.
 */
enum TmStatus tm_bma_default_options(struct TmBmaOptions *out);

/**
 * Runs model averaging on `design`.
 *
 * # Safety
 * `design` must be a live handle, `opts` readable and `out` writable.
 */
enum TmStatus tm_bma_run(const struct TmDesign *design,
                         const struct TmBmaOptions *opts,
                         struct TmBma **out);

/**
 * Number of candidate regressors in a result.
 *
 * # Safety
 * `bma` must be a live handle or null (returns 0).
 */
size_t tm_bma_n_vars(const struct TmBma *bma);

/**
 * Number of models carrying posterior mass in a result.
 *
 * # Safety
 * `bma` must be a live handle or null (returns 0).
 */
size_t tm_bma_n_models(const struct TmBma *bma);

/**
 * Posterior inclusion probabilities, one per regressor.
 *
 * # Safety
 * `out` must be writable for `len` doubles.
 */
enum TmStatus tm_bma_pip(const struct TmBma *bma, double *out, size_t len);

/**
 * Unconditional posterior means, one per regressor.
 *
 * # Safety
 * `out` must be writable for `len` doubles.
 */
enum TmStatus tm_bma_post_mean(const struct TmBma *bma, double *out, size_t len);

/**
 * Unconditional posterior standard deviations, one per regressor.
 *
 * # Safety
 * `out` must be writable for `len` doubles.
 */
enum TmStatus tm_bma_post_sd(const struct TmBma *bma, double *out, size_t len);

/**
 * # Safety
 * `bma` must come from [`tm_bma_run`] and not be freed twice.
 */
void tm_bma_free(struct TmBma *bma);

/**
 * Average-linkage clustering of a row-major `n × n` distance matrix.
 *
 * # Safety
 * `dist` must hold `n * n` doubles; `out` must be writable.
 */
enum TmStatus tm_hac_average(const double *dist, size_t n, struct TmDendrogram **out);

/**
 * Number of merges (`n - 1` for `n` leaves).
 *
 * # Safety
 * `d` must be a live handle or null (returns 0).
 */
size_t tm_dendrogram_n_merges(const struct TmDendrogram *d);

/**
 * Copies the merge sequence. Leaves are nodes `0..n`; merge `s` creates
 * node `n + s`.
 *
 * # Safety
 * Each output must be writable for `len` entries.
 */
enum TmStatus tm_dendrogram_merges(const struct TmDendrogram *d,
                                   size_t *left,
                                   size_t *right,
                                   double *height,
                                   size_t len);

/**
 * Flat labels for a cut into `k` clusters.
 *
 * # Safety
 * `labels` must be writable for `len` entries.
 */
enum TmStatus tm_dendrogram_cut(const struct TmDendrogram *d, size_t k, size_t *labels, size_t len);

/**
 * # Safety
 * `d` must come from [`tm_hac_average`] and not be freed twice.
 */
void tm_dendrogram_free(struct TmDendrogram *d);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TECHMIX_H */
