#ifndef OFFDECAY_H
#define OFFDECAY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OdStatus {
  OD_STATUS_OK = 0,
  OD_STATUS_NULL_POINTER = 1,
  OD_STATUS_DOMAIN = 2,
  OD_STATUS_CAPACITY = 3,
  OD_STATUS_CONVERGENCE = 4,
  OD_STATUS_FIT = 5,
  OD_STATUS_DEGENERATE = 6,
  OD_STATUS_SINGULAR = 7,
  OD_STATUS_USAGE = 8,
  OD_STATUS_PRECONDITION = 9,
  OD_STATUS_PARSE = 10,
  OD_STATUS_IO = 11,
  OD_STATUS_PANIC = 12,
} OdStatus;

/**
 * Opaque matrix handle.
 */
typedef struct OdMatrix OdMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. Valid until the next call.
 */
const char *od_last_error(void);

/**
 * Matrix on the box of `radius` in `Z^dim` from row-major entries; `im` may be null.
 *
 * # Safety
 * `re` (and `im` if non-null) must point to `len` readable doubles.
 */
enum OdStatus od_matrix_new(size_t dim,
                            size_t radius,
                            const double *re,
                            const double *im,
                            size_t len,
                            struct OdMatrix **out);

/**
 * The shift example `I − Γ` on the box of `radius` in `Z`.
 *
 * # Safety
 * Pointer arguments must be valid for the reads and writes they name; handles must be live.
 */
enum OdStatus od_matrix_shift_example(double k, double beta, size_t radius, struct OdMatrix **out);

/**
 * Matrix from a JSON generator description.
 *
 * # Safety
 * `json` must be a NUL-terminated string.
 */
enum OdStatus od_matrix_generate(const char *json, struct OdMatrix **out);

/**
 * # Safety
 * `m` must be null or a live handle; it is invalid afterwards.
 */
void od_matrix_free(struct OdMatrix *m);

/**
 * Side length `n` of the matrix, or 0 for null.
 *
 * # Safety
 * Pointer arguments must be valid for the reads and writes they name; handles must be live.
 */
size_t od_matrix_size(const struct OdMatrix *m);

/**
 * # Safety
 * Pointer arguments must be valid for the reads and writes they name; handles must be live.
 */
enum OdStatus od_matrix_get(const struct OdMatrix *m, size_t i, size_t j, double *re, double *im);

/**
 * # Safety
 * Pointer arguments must be valid for the reads and writes they name; handles must be live.
 */
enum OdStatus od_op_norm(const struct OdMatrix *m, double tol, double *out);

/**
 * # Safety
 * Pointer arguments must be valid for the reads and writes they name; handles must be live.
 */
enum OdStatus od_contraction(const struct OdMatrix *m, double tol, double *r, double *norm);

/**
 * # Safety
 * Pointer arguments must be valid for the reads and writes they name; handles must be live.
 */
enum OdStatus od_neumann_inverse(const struct OdMatrix *m,
                                 double tol,
                                 struct OdMatrix **out,
                                 double *tail_bound,
                                 size_t *terms);

/**
 * # Safety
 * Pointer arguments must be valid for the reads and writes they name; handles must be live.
 */
enum OdStatus od_direct_inverse(const struct OdMatrix *m, struct OdMatrix **out);

/**
 * # Safety
 * Pointer arguments must be valid for the reads and writes they name; handles must be live.
 */
enum OdStatus od_spectral_interval(const struct OdMatrix *m,
                                   double tol,
                                   double *a,
                                   double *b,
                                   double *kappa);

/**
 * `m_ε` on `Z^dim`.
 *
 * # Safety
 * Pointer arguments must be valid for the reads and writes they name; handles must be live.
 */
enum OdStatus od_m_epsilon(size_t dim, double epsilon, double tail_tol, double *out);

/**
 * # Safety
 * Pointer arguments must be valid for the reads and writes they name; handles must be live.
 */
enum OdStatus od_demko_bound(double m,
                             double a_spec,
                             double b_spec,
                             double c,
                             double distance,
                             double *out);

/**
 * Jaffard rate and constant with `m_ε` taken on `Z^dim` (tail tolerance added to each sum).
 *
 * # Safety
 * Pointer arguments must be valid for the reads and writes they name; handles must be live.
 */
enum OdStatus od_jaffard_constants(double gamma,
                                   double c_gamma,
                                   double r,
                                   double op_norm_value,
                                   size_t dim,
                                   double delta,
                                   double gamma_prime,
                                   double tail_tol,
                                   double *rate,
                                   double *constant);

/**
 * # Safety
 * Pointer arguments must be valid for the reads and writes they name; handles must be live.
 */
enum OdStatus od_thm44_constants(double k1,
                                 double m1,
                                 double r,
                                 double op_norm_value,
                                 double a,
                                 double c2,
                                 double *rate,
                                 double *constant);

/**
 * `φ(p)` for a φ written as `power:<α>`, `log` or a `*`-joined product.
 *
 * # Safety
 * `spec` must be a NUL-terminated string.
 */
enum OdStatus od_phi_eval(const char *spec, double p, double *out);

/**
 * # Safety
 * `spec` must be a NUL-terminated string.
 */
enum OdStatus od_phi_inverse(const char *spec, double y, double tol, double *out);

/**
 * Runs an experiment and returns its JSON report.
 *
 * `bound` is `"jaffard"`, `"thm44"` or `"demko"`; `config_json` may be null for defaults.
 *
 * # Safety
 * String arguments must be NUL-terminated; `*out` must be released with [`od_string_free`].
 */
enum OdStatus od_run_experiment(const char *generator_json,
                                const char *bound,
                                const char *config_json,
                                char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void od_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OFFDECAY_H */
