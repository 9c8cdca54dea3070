#ifndef LOGARCH_H
#define LOGARCH_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum LogarchStatus {
  LOGARCH_STATUS_OK = 0,
  LOGARCH_STATUS_NULL_POINTER = 1,
  LOGARCH_STATUS_INVALID_ARGUMENT = 2,
  LOGARCH_STATUS_DIMENSION = 3,
  LOGARCH_STATUS_NON_FINITE = 4,
  LOGARCH_STATUS_UNSTABLE = 5,
  LOGARCH_STATUS_NUMERICAL = 6,
  LOGARCH_STATUS_STABILITY_BUDGET = 7,
  LOGARCH_STATUS_UNKNOWN_PARAMETER = 8,
  LOGARCH_STATUS_IO = 9,
  LOGARCH_STATUS_PARSE = 10,
  LOGARCH_STATUS_PANIC = 11,
} LogarchStatus;

/*
 Opaque fitted chain together with the data it was fitted on.
 */
typedef struct LogarchFit LogarchFit;

/*
 Opaque panel of outcomes, initial values and covariates.
 */
typedef struct LogarchPanel LogarchPanel;

/*
 Opaque weight matrix.
 */
typedef struct LogarchWeights LogarchWeights;

/*
 Settings for [`logarch_simulate`]. `beta` points at `k` coefficients.
 */
typedef struct LogarchSimOptions {
  size_t periods;
  size_t q;
  double rho;
  double gamma;
  double delta;
  const double *beta;
  size_t k;
  uint64_t seed;
} LogarchSimOptions;

/*
 Settings for [`logarch_fit`].
 */
typedef struct LogarchFitOptions {
  /*
   Number of factors, or the maximum number when `shrinkage` is set.
   */
  size_t q;
  size_t iterations;
  size_t burn_in;
  size_t thin;
  uint64_t seed;
  bool shrinkage;
  /*
   Optional JSON prior, NUL-terminated. Null means the diffuse prior.
   */
  const char *prior_json;
} LogarchFitOptions;

typedef struct LogarchSummary {
  double mean;
  double sd;
  double median;
  double lo;
  double hi;
} LogarchSummary;

typedef struct LogarchDic {
  double dic;
  double mean_deviance;
  double plug_in_deviance;
  double p_d;
} LogarchDic;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. Valid until the
 next call on the same thread.
 */
const char *logarch_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *logarch_version(void);

/*
 Queen contiguity on a `rows x cols` lattice, optionally row-normalized.

 # Safety
 `out` must be valid for a write.
 */
enum LogarchStatus logarch_weights_queen(size_t rows,
                                         size_t cols,
                                         bool row_normalize,
                                         struct LogarchWeights **out);

/*
 Weight matrix from an `n x n` row-major buffer.

 # Safety
 `m` must point at `n * n` doubles and `out` must be valid for a write.
 */
enum LogarchStatus logarch_weights_from_dense(size_t n,
                                              const double *m,
                                              bool row_normalize,
                                              struct LogarchWeights **out);

/*
 # Safety
 `w` must be a live handle.
 */
enum LogarchStatus logarch_weights_n(const struct LogarchWeights *w, size_t *n);

/*
 # Safety
 `w` must come from this library and is invalid afterwards. Null is a no-op.
 */
void logarch_weights_free(struct LogarchWeights *w);

/*
 Panel from row-major buffers: `y` is `n x periods`, `y0` has `n`
 values, `x` is `n x periods x k` with `x[(i * periods + t) * k + c]`.

 # Safety
 Buffers must hold the stated number of doubles; `x` may be null when
 `k == 0`.
 */
enum LogarchStatus logarch_panel_new(size_t n,
                                     size_t periods,
                                     size_t k,
                                     const double *y,
                                     const double *y0,
                                     const double *x,
                                     struct LogarchPanel **out);

/*
 Units, periods and covariates of a panel. Any output may be null.

 # Safety
 `p` must be a live handle.
 */
enum LogarchStatus logarch_panel_shape(const struct LogarchPanel *p,
                                       size_t *n,
                                       size_t *periods,
                                       size_t *k);

/*
 Copy the `n x periods` outcomes into `y`.

 # Safety
 `y` must hold `len` doubles.
 */
enum LogarchStatus logarch_panel_outcomes(const struct LogarchPanel *p, double *y, size_t len);

/*
 # Safety
 `p` must come from this library and is invalid afterwards. Null is a no-op.
 */
void logarch_panel_free(struct LogarchPanel *p);

/*
 Simulate a panel on `weights`. Covariates are Uniform(0, 1); loadings
 and factors standard normal.

 # Safety
 `opts.beta` must point at `opts.k` doubles; `out` must be valid for a write.
 */
enum LogarchStatus logarch_simulate(const struct LogarchWeights *weights,
                                    const struct LogarchSimOptions *opts,
                                    struct LogarchPanel **out);

/*
 Fit one chain. With `opts.shrinkage` the Lasso sampler runs with
 `opts.q` as the maximum number of factors.

 # Safety
 Handles must be live and `out` valid for a write.
 */
enum LogarchStatus logarch_fit(const struct LogarchPanel *panel,
                               const struct LogarchWeights *weights,
                               const struct LogarchFitOptions *opts,
                               struct LogarchFit **out);

/*
 Number of retained draws.

 # Safety
 `fit` must be a live handle.
 */
enum LogarchStatus logarch_fit_len(const struct LogarchFit *fit, size_t *len);

/*
 Post burn-in acceptance rate of the `rho` proposal.

 # Safety
 `fit` must be a live handle.
 */
enum LogarchStatus logarch_fit_acceptance_rate(const struct LogarchFit *fit, double *rate);

/*
 Copy the retained draws of a named parameter (`rho`, `gamma`, `delta`,
 `beta_1`, ..., `tau2_1`, ..., `phi2`) into `values`.

 # Safety
 `name` must be NUL-terminated and `values` hold `len` doubles.
 */
enum LogarchStatus logarch_fit_parameter(const struct LogarchFit *fit,
                                         const char *name,
                                         double *values,
                                         size_t len);

/*
 Posterior mean, sd, median and 95% interval of a named parameter.

 # Safety
 `name` must be NUL-terminated and `out` valid for a write.
 */
enum LogarchStatus logarch_fit_summary(const struct LogarchFit *fit,
                                       const char *name,
                                       struct LogarchSummary *out);

/*
 Deviance information criterion of the chain. With `marginal` set the
 mixture indicators are summed out of the likelihood.

 # Safety
 `out` must be valid for a write.
 */
enum LogarchStatus logarch_fit_dic(const struct LogarchFit *fit,
                                   bool marginal,
                                   struct LogarchDic *out);

/*
 Cellwise median and 95% interval of the log-volatility, each an
 `n x periods` row-major buffer of `len` doubles. `overall` receives the
 average of the median field and may be null.

 # Safety
 Buffers must hold `len` doubles.
 */
enum LogarchStatus logarch_fit_volatility(const struct LogarchFit *fit,
                                          double *median,
                                          double *lo,
                                          double *hi,
                                          size_t len,
                                          double *overall);

/*
 # Safety
 `fit` must come from this library and is invalid afterwards. Null is a no-op.
 */
void logarch_fit_free(struct LogarchFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOGARCH_H */
