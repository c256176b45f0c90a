#ifndef PRIORRM_H
#define PRIORRM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

typedef enum PrmStatus {
  PRM_STATUS_OK = 0,
  PRM_STATUS_NULL_POINTER = 1,
  PRM_STATUS_DOMAIN = 2,
  PRM_STATUS_PRECONDITION = 3,
  PRM_STATUS_CONVERGENCE = 4,
  PRM_STATUS_PARSE = 5,
  PRM_STATUS_IO = 6,
  /**
   * A Rust panic was caught at the boundary; this is a bug.
   */
  PRM_STATUS_INTERNAL = 7,
} PrmStatus;

typedef enum PrmStartMode {
  PRM_START_MODE_PRIOR = 0,
  PRM_START_MODE_UNIFORM = 1,
} PrmStartMode;

typedef enum PrmAlgorithm {
  PRM_ALGORITHM_STANDARD = 0,
  PRM_ALGORITHM_PRIOR = 1,
} PrmAlgorithm;

/**
 * Opaque prior handle.
 */
typedef struct PrmPrior PrmPrior;

/**
 * Controls for the numeric argmax paths.
 */
typedef struct PrmArgmaxOptions {
  double abs_tol;
  size_t max_evals;
} PrmArgmaxOptions;

/**
 * Ensemble description; fill with [`prm_scenario_default`] and adjust.
 */
typedef struct PrmScenario {
  double prior_mean;
  double prior_sd;
  double slope_log_mean;
  double slope_log_sd;
  double s1_log10_low;
  double s1_log10_high;
  double noise_sd;
  double c0;
  size_t iterations;
  size_t runs;
  size_t batches;
  enum PrmStartMode start_mode;
  enum PrmAlgorithm algorithm;
  uint64_t seed;
  struct PrmArgmaxOptions argmax;
} PrmScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on the calling thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *prm_last_error_message(void);

/**
 * # Safety
 * `out_prior` must be a valid pointer to writable storage for a handle.
 */
enum PrmStatus prm_prior_gaussian(double mu, double sigma, struct PrmPrior **out_prior);

/**
 * Mixture of `len` Gaussians sharing `sigma`. Weights must sum to 1.
 *
 * # Safety
 * `weights` and `means` must point to `len` readable doubles.
 */
enum PrmStatus prm_prior_mixture(const double *weights,
                                 const double *means,
                                 size_t len,
                                 double sigma,
                                 struct PrmPrior **out_prior);

/**
 * Equal-weight mixture centred on `samples`. A non-positive or NaN
 * `bandwidth` selects the normal-reference rule.
 *
 * # Safety
 * `samples` must point to `len` readable doubles.
 */
enum PrmStatus prm_prior_kde(const double *samples,
                             size_t len,
                             double bandwidth,
                             struct PrmPrior **out_prior);

/**
 * Improper flat prior; prior steps then equal standard steps.
 *
 * # Safety
 * `out_prior` must be a valid pointer to writable storage for a handle.
 */
enum PrmStatus prm_prior_uniform(struct PrmPrior **out_prior);

/**
 * Piecewise-linear log-density on a strictly increasing grid. A NaN
 * `slope_bound` derives the bound from the table itself.
 *
 * # Safety
 * `grid` and `log_density` must point to `len` readable doubles.
 */
enum PrmStatus prm_prior_tabulated(const double *grid,
                                   const double *log_density,
                                   size_t len,
                                   double slope_bound,
                                   struct PrmPrior **out_prior);

/**
 * # Safety
 * `prior` must be null or a handle from a `prm_prior_*` constructor that
 * has not been freed.
 */
void prm_prior_free(struct PrmPrior *prior);

/**
 * # Safety
 * `prior` must be a live handle; `out_value` must be writable.
 */
enum PrmStatus prm_prior_log_density(const struct PrmPrior *prior, double x, double *out_value);

/**
 * # Safety
 * `prior` must be a live handle; `out_value` must be writable.
 */
enum PrmStatus prm_prior_log_density_slope(const struct PrmPrior *prior,
                                           double x,
                                           double *out_value);

/**
 * Writes the certified bound on `|d/dx log P|`, or `+inf` if the prior has
 * none.
 *
 * # Safety
 * `prior` must be a live handle; `out_value` must be writable.
 */
enum PrmStatus prm_prior_slope_bound(const struct PrmPrior *prior, double *out_value);

/**
 * Default argmax controls.
 */
struct PrmArgmaxOptions prm_argmax_options_default(void);

/**
 * Proposal `x - (s1 / i) (y - y_target)`.
 *
 * # Safety
 * `out_x` must be writable.
 */
enum PrmStatus prm_rm_proposal(uint64_t i,
                               double x,
                               double y,
                               double y_target,
                               double s1,
                               double *out_x);

/**
 * One standard step from iterate `x` at 1-based index `i`.
 *
 * # Safety
 * `out_x` must be writable.
 */
enum PrmStatus prm_standard_step(uint64_t i,
                                 double x,
                                 double y,
                                 double y_target,
                                 double s1,
                                 double *out_x);

/**
 * One prior-information step. `options` may be null for the defaults.
 *
 * # Safety
 * `prior` must be a live handle, `options` null or readable, `out_x`
 * writable.
 */
enum PrmStatus prm_prior_step(const struct PrmPrior *prior,
                              uint64_t i,
                              double x,
                              double y,
                              double y_target,
                              double s1,
                              double c0,
                              const struct PrmArgmaxOptions *options,
                              double *out_x);

/**
 * Recommended `c0` from the shipped linear rule.
 *
 * # Safety
 * `out_c0` must be writable.
 */
enum PrmStatus prm_recommend_c0(double noise_sd, uint64_t planned_iterations, double *out_c0);

/**
 * Fills `out_scenario` with the library defaults.
 *
 * # Safety
 * `out_scenario` must be writable.
 */
enum PrmStatus prm_scenario_default(struct PrmScenario *out_scenario);

/**
 * Runs an ensemble and writes the per-iteration median deviations into
 * `out_medians`, which must hold `scenario.iterations` doubles. `prior`
 * may be null to use `N(prior_mean, prior_sd^2)`. `out_runs` and
 * `out_divergent` may be null.
 *
 * # Safety
 * Pointers must be valid for the documented sizes.
 */
enum PrmStatus prm_run_ensemble(const struct PrmScenario *scenario,
                                const struct PrmPrior *prior,
                                double *out_medians,
                                size_t medians_len,
                                size_t *out_runs,
                                size_t *out_divergent);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRIORRM_H */
