#ifndef OSCILLAB_H
#define OSCILLAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum OscStatus {
  OSC_STATUS_OK = 0,
  OSC_STATUS_NULL_POINTER = 1,
  OSC_STATUS_INVALID_ARGUMENT = 2,
  OSC_STATUS_PARSE_ERROR = 3,
  OSC_STATUS_PRECONDITION = 4,
  OSC_STATUS_NUMERICAL = 5,
  OSC_STATUS_PANIC = 6,
  OSC_STATUS_BUFFER_TOO_SMALL = 7,
} OscStatus;

/**
 * A local oscillation family (mean or polynomial projections).
 */
typedef struct OscFamily OscFamily;

/**
 * A function sampled on the leaves of a dyadic grid.
 */
typedef struct OscGrid OscGrid;

/**
 * A finite metric measure space.
 */
typedef struct OscSpace OscSpace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *osc_version(void);

/**
 * Copies the message of the last failed call on this thread into `buf`.
 * The message is empty after a successful call.
 *
 * # Safety
 * `buf` must point to `len` writable bytes (or be null with `len == 0`);
 * `needed` may be null.
 */
enum OscStatus osc_last_error(char *buf, size_t len, size_t *needed);

/**
 * Grid function on the unit cube from `2^{dim·depth}` leaf values in
 * row-major order (first coordinate most significant).
 *
 * # Safety
 * `values` must point to `len` doubles; `out` must be writable.
 */
enum OscStatus osc_grid_new(size_t dim,
                            uint32_t depth,
                            const double *values,
                            size_t len,
                            struct OscGrid **out_grid);

/**
 * Grid function from the JSON accepted by the command-line tool.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out_grid` must be writable.
 */
enum OscStatus osc_grid_from_json(const char *json, struct OscGrid **out_grid);

/**
 * # Safety
 * `grid` must come from this library and not be used afterwards. Null is a no-op.
 */
void osc_grid_free(struct OscGrid *grid);

/**
 * Number of leaves.
 *
 * # Safety
 * `grid` must be a live handle; `out_len` must be writable.
 */
enum OscStatus osc_grid_len(const struct OscGrid *grid, size_t *out_len);

/**
 * The mean family `A_Q f = f_Q`.
 *
 * # Safety
 * `out_family` must be writable.
 */
enum OscStatus osc_family_mean(struct OscFamily **out_family);

/**
 * Projections onto cell-averaged polynomials of total degree ≤ `degree`
 * for grids of the given dimension and depth.
 *
 * # Safety
 * `out_family` must be writable.
 */
enum OscStatus osc_family_polynomial(size_t dim,
                                     uint32_t depth,
                                     uint32_t degree,
                                     struct OscFamily **out_family);

/**
 * # Safety
 * `family` must come from this library and not be used afterwards. Null is a no-op.
 */
void osc_family_free(struct OscFamily *family);

/**
 * Dyadic maximal function of `|f|` on the whole grid, one value per leaf.
 *
 * # Safety
 * `grid` must be live; `out_values` must hold `len` doubles, with `len`
 * equal to the leaf count.
 */
enum OscStatus osc_dyadic_maximal(const struct OscGrid *grid, double *out_values, size_t len);

/**
 * `‖f‖_{JN_p}` on the whole grid. A null `family` means the mean family.
 *
 * # Safety
 * `grid` must be live, `family` live or null, `out_value` writable.
 */
enum OscStatus osc_jn_norm(const struct OscGrid *grid,
                           const struct OscFamily *family,
                           double p,
                           double *out_value);

/**
 * Dyadic BMO norm on the whole grid.
 *
 * # Safety
 * `grid` must be live; `out_value` writable.
 */
enum OscStatus osc_bmo_norm(const struct OscGrid *grid, double *out_value);

/**
 * Smallest `ε` for which the weight is in the Gurov–Reshetnyak class
 * (mean family), and the exponent `p(ε)` (`+∞` when `ε = 0`).
 *
 * # Safety
 * `grid` must be live; outputs writable.
 */
enum OscStatus osc_gr_epsilon(const struct OscGrid *grid, double *out_epsilon, double *out_p);

/**
 * Level-set inequality for the John–Nirenberg decomposition of `f` at one
 * `(K, γ, λ)`. `out_pass` is 1 when it holds (or the point is skipped
 * because `λ < F_{Q0}` or `K ≤ Θ`), else 0. `out_ratio` is the observed
 * ratio, at most 1 when the inequality holds.
 *
 * # Safety
 * `grid` must be live; outputs writable.
 */
enum OscStatus osc_levelset_jn(const struct OscGrid *grid,
                               double k,
                               double gamma,
                               double lambda,
                               int32_t *out_pass,
                               double *out_ratio);

/**
 * Metric space from a row-major `n × n` distance matrix and `n` weights.
 *
 * # Safety
 * `dist` must hold `n*n` doubles and `weights` `n`; `out_space` writable.
 */
enum OscStatus osc_space_new(const double *dist,
                             const double *weights,
                             size_t n,
                             struct OscSpace **out_space);

/**
 * Metric space from the JSON accepted by the command-line tool.
 *
 * # Safety
 * `json` must be NUL-terminated; `out_space` writable.
 */
enum OscStatus osc_space_from_json(const char *json, struct OscSpace **out_space);

/**
 * # Safety
 * `space` must come from this library and not be used afterwards. Null is a no-op.
 */
void osc_space_free(struct OscSpace *space);

/**
 * Doubling profile `(c_μ, D)` chosen over the default `D` grid.
 *
 * # Safety
 * `space` must be live; outputs writable.
 */
enum OscStatus osc_space_doubling(const struct OscSpace *space, double *out_c, double *out_d);

/**
 * `ρ`-oscillation John–Nirenberg norm of `f` on the ball `B(center, radius)`.
 * `out_exact` is 1 when the disjoint-family search finished, else 0 (the
 * value is then a lower bound).
 *
 * # Safety
 * `space` must be live; `f` must hold as many doubles as the space has
 * points; outputs writable.
 */
enum OscStatus osc_metric_jn_norm(const struct OscSpace *space,
                                  const double *f,
                                  size_t len,
                                  double p,
                                  double rho,
                                  double tau,
                                  size_t center,
                                  double radius,
                                  double *out_value,
                                  int32_t *out_exact);

/**
 * Runs a command-line subcommand and writes its JSON report into `buf`.
 * `argv` holds the arguments after the program name, e.g.
 * `{"jn-norm", "--p", "2", "--input", "f.json"}`. `out_pass` receives 1
 * when every checked inequality held, else 0.
 *
 * # Safety
 * `argv` must hold `argc` NUL-terminated strings; `buf` must point to `len`
 * writable bytes; `needed` and `out_pass` may be null.
 */
enum OscStatus osc_run(const char *const *argv,
                       size_t argc,
                       char *buf,
                       size_t len,
                       size_t *needed,
                       int32_t *out_pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OSCILLAB_H */
