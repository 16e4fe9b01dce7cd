#ifndef SCHRODINGERIZER_H
#define SCHRODINGERIZER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SchroStatus {
  SCHRO_STATUS_OK = 0,
  SCHRO_STATUS_NULL_POINTER = 1,
  SCHRO_STATUS_INVALID_ARGUMENT = 2,
  SCHRO_STATUS_DIMENSION_MISMATCH = 3,
  SCHRO_STATUS_NUMERICAL = 4,
  SCHRO_STATUS_UNSUPPORTED = 5,
  SCHRO_STATUS_CONFIG = 6,
  SCHRO_STATUS_IO = 7,
  SCHRO_STATUS_BLOW_UP = 8,
  SCHRO_STATUS_PANIC = 9,
} SchroStatus;

typedef enum SchroRecovery {
  SCHRO_RECOVERY_INTEGRATE_P = 0,
  SCHRO_RECOVERY_POINT_P = 1,
} SchroRecovery;

typedef enum SchroDilationVariant {
  SCHRO_DILATION_VARIANT_EXACT_EXP = 0,
  SCHRO_DILATION_VARIANT_THEOREM_ARCCOS = 1,
} SchroDilationVariant;

/**
 * A parsed and validated experiment configuration.
 */
typedef struct SchroExperiment SchroExperiment;

/**
 * A linear system `du/dt = Au + b` split into `A = H1 + iH2`.
 */
typedef struct SchroOdeSystem SchroOdeSystem;

typedef struct SchroComplex {
  double re;
  double im;
} SchroComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *schro_last_error_message(void);

void schro_clear_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *schro_version(void);

/**
 * Left edge `L = l0 − t·s_max` of a `p` domain that keeps the fastest
 * left-moving wave inside up to time `t`.
 */
double schro_estimate_domain(double t, double s_max, double l0);

/**
 * Parses a JSON experiment config (or a run manifest) and validates it.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum SchroStatus schro_experiment_from_json(const char *json, struct SchroExperiment **out);

/**
 * Runs the experiment, writing its CSV files and manifest into `out_dir`
 * (or the config's `out_dir` when null). `n_files` receives the number of
 * files written and may be null.
 *
 * # Safety
 * `exp` must come from [`schro_experiment_from_json`]; `out_dir` is null or
 * a NUL-terminated path.
 */
enum SchroStatus schro_experiment_run(const struct SchroExperiment *exp,
                                      const char *out_dir,
                                      size_t *n_files);

/**
 * # Safety
 * `exp` is null or a handle from [`schro_experiment_from_json`] not yet freed.
 */
void schro_experiment_free(struct SchroExperiment *exp);

/**
 * Builds `du/dt = Au + b` from an `n × n` row-major `a`, an optional `b`
 * (null for a homogeneous system) and `u0`. A nonzero `b` is absorbed by
 * augmenting the state with a constant trailing component.
 *
 * # Safety
 * `a` holds `n·n` values, `b` (if not null) and `u0` hold `n`; `out` must
 * be writable.
 */
enum SchroStatus schro_ode_new(size_t n,
                               const struct SchroComplex *a,
                               const struct SchroComplex *b,
                               const struct SchroComplex *u0,
                               struct SchroOdeSystem **out);

/**
 * Size of the caller's system (before any augmentation).
 *
 * # Safety
 * `sys` is null or a live handle.
 */
size_t schro_ode_dimension(const struct SchroOdeSystem *sys);

/**
 * Largest eigenvalue of `H1 = (A + A†)/2`; positive values mean the lifted
 * wave moves right and need a `p*` beyond `λ·t`.
 *
 * # Safety
 * `sys` is a live handle; `out` must be writable.
 */
enum SchroStatus schro_ode_lambda_max(const struct SchroOdeSystem *sys, double *out);

/**
 * Evolves the lifted system exactly to `t_final` on an `n_p`-point `p`
 * lattice ending at `right` (left edge and support from the spectral
 * radius of `H1`), then recovers `u(t_final)` into `out` (`n` values).
 * With [`SchroRecovery::PointP`] a `p_star` of `0` picks the default node.
 *
 * # Safety
 * `sys` is a live handle; `out` holds `n` values.
 */
enum SchroStatus schro_ode_evolve(const struct SchroOdeSystem *sys,
                                  double t_final,
                                  size_t n_p,
                                  double alpha_neg,
                                  double right,
                                  enum SchroRecovery recovery,
                                  double p_star,
                                  struct SchroComplex *out);

/**
 * # Safety
 * `sys` is null or a handle from [`schro_ode_new`] not yet freed.
 */
void schro_ode_free(struct SchroOdeSystem *sys);

/**
 * Runs `n_steps` steps of the parity-dilating ladder for `dψ/dt = (H1 +
 * iH2)ψ`. `out_top` receives the unnormalised success block (`n` values)
 * and `out_success` its probability `‖top‖²/‖ψ0‖²`.
 *
 * # Safety
 * `h1`, `h2` hold `n·n` values, `psi0` and `out_top` hold `n`;
 * `out_success` must be writable.
 */
enum SchroStatus schro_dilation_evolve(size_t n,
                                       const struct SchroComplex *h1,
                                       const struct SchroComplex *h2,
                                       double dt,
                                       size_t n_steps,
                                       const struct SchroComplex *psi0,
                                       enum SchroDilationVariant variant,
                                       struct SchroComplex *out_top,
                                       double *out_success);

/**
 * Evaluates a cost query given as JSON (same schema as the CLI). The
 * polylog factor is written as NaN when the query does not produce one;
 * `out_polylog` may be null.
 *
 * # Safety
 * `query_json` is NUL-terminated; `out_leading` must be writable.
 */
enum SchroStatus schro_estimate(const char *query_json, double *out_leading, double *out_polylog);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCHRODINGERIZER_H */
