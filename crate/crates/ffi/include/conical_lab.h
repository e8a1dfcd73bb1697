#ifndef CONICAL_LAB_H
#define CONICAL_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum ClStatus {
  CL_STATUS_OK = 0,
  CL_STATUS_INVALID_PARAMETER = 1,
  CL_STATUS_GRID_MISMATCH = 2,
  CL_STATUS_NOT_ELLIPTIC = 3,
  CL_STATUS_DEGENERATE = 4,
  CL_STATUS_NOT_ADAPTED = 5,
  CL_STATUS_NON_CONTRACTION = 6,
  CL_STATUS_MAX_ITERATIONS = 7,
  CL_STATUS_CONFIG = 8,
  CL_STATUS_IO = 9,
  CL_STATUS_NULL_POINTER = 10,
  CL_STATUS_PANIC = 11,
} ClStatus;

typedef enum ClCoefficients {
  CL_COEFFICIENTS_IDENTITY = 0,
  /**
   * Piecewise-constant random field; uses `seed`, `lambda_min`, `lambda_max`.
   */
  CL_COEFFICIENTS_CHECKERBOARD = 1,
} ClCoefficients;

/**
 * Integrand family for [`cl_conical_ratio`]. `param` is the eigen index,
 * the singular level, or the atom radius; `seed` is used by atoms only.
 */
typedef enum ClFamily {
  CL_FAMILY_ZERO = 0,
  CL_FAMILY_EIGENMODE = 1,
  CL_FAMILY_ADAPTED = 2,
  CL_FAMILY_SINGULAR = 3,
  CL_FAMILY_ATOM = 4,
} ClFamily;

/**
 * Opaque bundle of operator, time grid and noise stepping.
 */
typedef struct ClSetup ClSetup;

/**
 * Monte-Carlo ratio with its delta-method standard error.
 */
typedef struct ClRatio {
  double ratio;
  double stderr;
  double lhs_moment;
  double rhs_moment;
} ClRatio;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or an empty string.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *cl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cl_version(void);

/**
 * Builds a setup on an `n`-dimensional torus with `points` sites per axis.
 * Time grid and Itô step use the library defaults (`t_min = h²`,
 * `t_max = L²/4`, `dt = t_min/2`).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum ClStatus cl_setup_new(size_t n,
                           size_t points,
                           double side,
                           size_t nodes,
                           size_t d_h,
                           enum ClCoefficients coefficients,
                           uint64_t seed,
                           double lambda_min,
                           double lambda_max,
                           struct ClSetup **out);

/**
 * Releases a setup. Null is ignored.
 *
 * # Safety
 * `setup` must come from [`cl_setup_new`] and not have been freed.
 */
void cl_setup_free(struct ClSetup *setup);

/**
 * Number of lattice sites, or 0 for a null handle.
 *
 * # Safety
 * `setup` must be null or a live handle.
 */
size_t cl_setup_num_sites(const struct ClSetup *setup);

/**
 * Copies the ascending eigenvalues of the operator into `out[0..len]`.
 *
 * # Safety
 * `setup` must be a live handle and `out` valid for `len` writes.
 */
enum ClStatus cl_setup_eigenvalues(const struct ClSetup *setup, double *out, size_t len);

/**
 * `output = S(t) input` on the lattice.
 *
 * # Safety
 * `setup` must be a live handle; `input` and `output` valid for `len` values.
 */
enum ClStatus cl_setup_semigroup_apply(const struct ClSetup *setup,
                                       double t,
                                       const double *input,
                                       double *output,
                                       size_t len);

/**
 * Monte-Carlo estimate of `(E‖G S⋄g‖^p)^{1/p} / (E‖g‖^p)^{1/p}`.
 *
 * # Safety
 * `setup` must be a live handle and `out` a valid pointer.
 */
enum ClStatus cl_conical_ratio(const struct ClSetup *setup,
                               double p,
                               double beta,
                               double alpha,
                               enum ClFamily family,
                               double param,
                               uint64_t family_seed,
                               size_t trials,
                               uint64_t seed,
                               struct ClRatio *out);

/**
 * Tent norm of a field given as `values[node][site][component]` on the
 * geometric grid with `nodes` points in `[t_min, t_max]`.
 *
 * # Safety
 * `values` must be valid for `len` reads and `out` a valid pointer.
 */
enum ClStatus cl_tent_norm(size_t n,
                           size_t points,
                           double side,
                           double t_min,
                           double t_max,
                           size_t nodes,
                           size_t components,
                           const double *values,
                           size_t len,
                           double p,
                           double beta,
                           double alpha,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONICAL_LAB_H */
