#ifndef FK_GROUND_H
#define FK_GROUND_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum FkStatus {
  FK_STATUS_OK = 0,
  // A required pointer argument was null.
  FK_STATUS_NULL_POINTER = 1,
  // Malformed argument: bad UTF-8, empty window, mismatched dimension.
  FK_STATUS_INVALID_ARGUMENT = 2,
  FK_STATUS_IO = 3,
  FK_STATUS_FORMAT = 4,
  FK_STATUS_INVALID_MODEL = 5,
  // A hypothesis or precondition of the check does not hold.
  FK_STATUS_HYPOTHESIS = 6,
  // The hull solver hit a resonance or did not converge.
  FK_STATUS_SOLVER = 7,
  // A minimization did not converge or produced non-finite values.
  FK_STATUS_SEARCH = 8,
  // A contact certificate failed.
  FK_STATUS_COUNTEREXAMPLE = 9,
  FK_STATUS_PANIC = 10,
} FkStatus;

// A hull function of a quasi-periodic family.
typedef struct FkHull FkHull;

// A loaded interaction model.
typedef struct FkModel FkModel;

// Convergence data of [`fk_hull_solve`].
typedef struct FkHullStats {
  double residual;
  double refined_residual;
  // `min (1 + ∂_α h)`; positive for a monotone hull.
  double margin;
  double sup_norm;
  size_t newton_steps;
} FkHullStats;

// Outcome of one window minimization.
typedef struct FkWindowResult {
  // `Γ(φ*)`; nonpositive for a ground state.
  double gamma;
  // `max |E_i(u+φ*)|` over the window.
  double stationarity;
  size_t iterations;
} FkWindowResult;

// Parameters of [`fk_verify`]. Start from [`fk_verify_params_default`].
typedef struct FkVerifyParams {
  double beta_min;
  double beta_max;
  size_t beta_count;
  size_t max_window;
  double gamma_tol;
  double stationarity_tol;
  uint64_t seed;
} FkVerifyParams;

// Aggregate outcome of [`fk_verify`].
typedef struct FkVerifySummary {
  bool pass;
  size_t minimizations;
  size_t violations;
  double max_gamma;
  double max_stationarity;
} FkVerifySummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null when none
// failed. Valid until the next failing call on the same thread.
const char *fk_last_error_message(void);

// Status of the last failed call on this thread; `Ok` when none failed.
enum FkStatus fk_last_error_status(void);

void fk_clear_error(void);

// Library version as a static NUL-terminated string.
const char *fk_version(void);

// Loads a model file.
//
// # Safety
// `path` must be a NUL-terminated string; `out_model` must be writable.
enum FkStatus fk_model_load(const char *path, struct FkModel **out_model);

// Parses a model from TOML text.
//
// # Safety
// `toml` must be a NUL-terminated string; `out_model` must be writable.
enum FkStatus fk_model_from_toml(const char *toml, struct FkModel **out_model);

// # Safety
// `model` must come from this library and not be used afterwards.
void fk_model_free(struct FkModel *model);

// Lattice dimension of the model; 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t fk_model_dim(const struct FkModel *model);

// Strict upper bound on the range of every term; 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
uint64_t fk_model_range(const struct FkModel *model);

// Solves the hull equation of a quasi-periodic model with `n_trunc` modes
// per axis, continuing in ε from `epsilon_start` (the target when not
// positive). `stats` may be null.
//
// # Safety
// `model` must be a live handle; `out_hull` must be writable.
enum FkStatus fk_hull_solve(const struct FkModel *model,
                            size_t n_trunc,
                            double epsilon_start,
                            struct FkHull **out_hull,
                            struct FkHullStats *stats);

// Loads a hull file.
//
// # Safety
// `path` must be a NUL-terminated string; `out_hull` must be writable.
enum FkStatus fk_hull_load(const char *path, struct FkHull **out_hull);

// Writes a hull file.
//
// # Safety
// `hull` must be a live handle; `path` a NUL-terminated string.
enum FkStatus fk_hull_save(const struct FkHull *hull, const char *path);

// # Safety
// `hull` must come from this library and not be used afterwards.
void fk_hull_free(struct FkHull *hull);

// Evaluates `h(θ)` and `∂_α h(θ)` at a torus point of the hull's dimension.
// `d_alpha` may be null.
//
// # Safety
// `theta` must point to `len` doubles; `value` must be writable.
enum FkStatus fk_hull_eval(const struct FkHull *hull,
                           const double *theta,
                           size_t len,
                           double *value,
                           double *d_alpha);

// Value `u_i^β` of the family member at a site. `hull` may be null for
// models whose family is linear.
//
// # Safety
// `model` must be live, `coords` must point to `dim` integers and `value`
// must be writable.
enum FkStatus fk_member_value(const struct FkModel *model,
                              const struct FkHull *hull,
                              double beta,
                              const int64_t *coords,
                              size_t dim,
                              double *value);

// Equilibrium residual `E_i` of the family member at a site.
//
// # Safety
// As for [`fk_member_value`].
enum FkStatus fk_member_residual(const struct FkModel *model,
                                 const struct FkHull *hull,
                                 double beta,
                                 const int64_t *coords,
                                 size_t dim,
                                 double *residual);

// Minimizes the relative energy of the member at `beta` over perturbations
// supported on a window of `n_sites` sites, given as `n_sites * dim`
// row-major coordinates.
//
// # Safety
// `coords` must point to `n_sites * dim` integers; `result` must be
// writable.
enum FkStatus fk_minimize_window(const struct FkModel *model,
                                 const struct FkHull *hull,
                                 double beta,
                                 const int64_t *coords,
                                 size_t n_sites,
                                 size_t dim,
                                 struct FkWindowResult *result);

// Defaults: 21 values of β on `[-1, 1]`, windows up to 15 sites, both
// tolerances `1e-8`, seed 0.
struct FkVerifyParams fk_verify_params_default(void);

// Checks the hypotheses on the model and its family, then minimizes over
// nested windows at every β. Returns `Ok` with `summary.pass` set to the
// verdict, or `Hypothesis` when a hypothesis fails.
//
// # Safety
// `model` and `params` must be live; `hull` may be null; `summary` must be
// writable.
enum FkStatus fk_verify(const struct FkModel *model,
                        const struct FkHull *hull,
                        const struct FkVerifyParams *params,
                        struct FkVerifySummary *summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FK_GROUND_H */
