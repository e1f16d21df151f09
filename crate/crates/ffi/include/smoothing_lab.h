/* C ABI of the smoothing-lab numerical laboratory. */

#ifndef SMOOTHING_LAB_H
#define SMOOTHING_LAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes of every fallible call.
 */
typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_POINTER = 1,
  SL_STATUS_INVALID_ARGUMENT = 2,
  SL_STATUS_NUMERICAL_FAILURE = 3,
  SL_STATUS_INVALID_UTF8 = 4,
} SlStatus;

/**
 * Opaque periodic-box grid handle.
 */
typedef struct SlGrid SlGrid;

/**
 * Opaque weight handle.
 */
typedef struct SlWeight SlWeight;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread.  The pointer stays
 * valid until the next failing call on the same thread; do not free it.
 */
const char *sl_last_error_message(void);

/**
 * Creates a grid; `dim` in 1..=3, `points_per_axis` a power of two >= 8.
 *
 * # Safety
 * `out` must be a valid pointer to writable memory for one pointer.
 */
enum SlStatus sl_grid_new(uintptr_t dim,
                          uintptr_t points_per_axis,
                          double half_width,
                          struct SlGrid **out);

/**
 * # Safety
 * `grid` must be a pointer returned by [`sl_grid_new`], not yet freed.
 */
void sl_grid_free(struct SlGrid *grid);

/**
 * Grid spacing `2L/N`; returns NaN for a null handle.
 *
 * # Safety
 * `grid` must be a live handle from [`sl_grid_new`] or null.
 */
double sl_grid_spacing(const struct SlGrid *grid);

/**
 * Parses a catalog weight id such as `power:a=1.0` or `bump:c=0,w=1,A=2`.
 *
 * # Safety
 * `id` must be a NUL-terminated string and `out` writable.
 */
enum SlStatus sl_weight_parse(const char *id, uintptr_t dim, struct SlWeight **out);

/**
 * # Safety
 * `weight` must be a pointer returned by [`sl_weight_parse`], not yet freed.
 */
void sl_weight_free(struct SlWeight *weight);

/**
 * Pointwise weight value at `x[0..dim]` with the half-cell cap applied to
 * singular kinds.
 *
 * # Safety
 * `x` must point to `dim` readable doubles; `weight` and `out` must be live.
 */
enum SlStatus sl_weight_eval(const struct SlWeight *weight,
                             const double *x,
                             uintptr_t dim,
                             double half_cell,
                             double *out);

/**
 * Kerman–Sawyer norm of the weight over the dyadic family of the symmetric
 * box `[-half_width, half_width)^dim`, cubes down to side `min_side`.
 *
 * # Safety
 * `weight` and `out` must be live pointers.
 */
enum SlStatus sl_ks_norm(const struct SlWeight *weight,
                         uintptr_t dim,
                         double half_width,
                         double alpha,
                         double min_side,
                         uintptr_t cells_per_axis,
                         double *out);

/**
 * Morrey–Campanato norm over a lattice family of `centers_per_axis^dim`
 * centers spanning `[-extent, extent]^dim` and the given radii.
 *
 * # Safety
 * `weight`, `radii` (length `radii_len`) and `out` must be live pointers.
 */
enum SlStatus sl_mc_norm(const struct SlWeight *weight,
                         uintptr_t dim,
                         double alpha,
                         double p,
                         uintptr_t centers_per_axis,
                         double extent,
                         const double *radii,
                         uintptr_t radii_len,
                         uintptr_t cells_per_diameter,
                         double *out);

/**
 * `\widehat{dσ}(x)` for `|x| = r` on `S^{n-1}`, `n` in {2, 3}.
 *
 * # Safety
 * `out` must be writable.
 */
enum SlStatus sl_surface_measure_ft(uintptr_t n, double r, double *out);

/**
 * Smooth dyadic cutoff `ψ_j(t)` of the kernel decomposition.
 */
double sl_dyadic_cutoff(uint32_t j, double t);

/**
 * The smoothing exponent `s = 1 - (α/β + 2 - γ)/2` of the order condition.
 */
double sl_smoothing_exponent(double alpha, double beta, double gamma);

/**
 * Validates `(n, γ, α, β)`; on success writes the derived `s`.  Rejections
 * return `InvalidArgument` with every violated inequality named in
 * [`sl_last_error_message`].
 *
 * # Safety
 * `s_out` must be writable.
 */
enum SlStatus sl_validate_params(uintptr_t n,
                                 double gamma,
                                 double alpha,
                                 double beta,
                                 double *s_out);

/**
 * Weighted extension operator norm on the grid, normalized by the
 * Kerman–Sawyer factor: writes the raw `sigma` and the normalized constant.
 *
 * # Safety
 * All pointer arguments must be live; `grid` and `weight` stay owned by the
 * caller.
 */
enum SlStatus sl_extension_norm(const struct SlWeight *weight,
                                const struct SlGrid *grid,
                                uintptr_t n,
                                double gamma,
                                double alpha,
                                double beta,
                                uintptr_t rule_degree,
                                uint64_t seed,
                                double *sigma_out,
                                double *normalized_out);

/**
 * `‖w^β‖_{KS_α}^{1/(2β)}` on the grid's dyadic family.
 *
 * # Safety
 * `weight`, `grid` and `out` must be live pointers.
 */
enum SlStatus sl_ks_factor(const struct SlWeight *weight,
                           const struct SlGrid *grid,
                           uintptr_t n,
                           double gamma,
                           double alpha,
                           double beta,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMOOTHING_LAB_H */
