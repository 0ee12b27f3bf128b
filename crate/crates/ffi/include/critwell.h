#ifndef CRITWELL_H
#define CRITWELL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  CRITWELL_STATUS_OK = 0,
  CRITWELL_STATUS_NULL_POINTER = 1,
  CRITWELL_STATUS_INVALID_ARGUMENT = 2,
  CRITWELL_STATUS_DEGENERATE_STRIP = 3,
  CRITWELL_STATUS_IO = 4,
  CRITWELL_STATUS_NUMERICAL = 5,
  CRITWELL_STATUS_UNAVAILABLE = 6,
  CRITWELL_STATUS_PANIC = 7,
} CritwellStatus;

typedef enum {
  CRITWELL_PROFILE_KIND_SINE = 0,
  CRITWELL_PROFILE_KIND_BUMP_DERIVATIVE = 1,
} CritwellProfileKind;

typedef enum {
  CRITWELL_BACKEND_MODE_GALERKIN = 0,
  CRITWELL_BACKEND_FD_STAIRSTEP = 1,
} CritwellBackend;

/**
 * Opaque deformation profile.
 */
typedef struct CritwellProfile CritwellProfile;

/**
 * Opaque solver result.
 */
typedef struct CritwellSpectrum CritwellSpectrum;

/**
 * Theory quantities; `has_c1`/`has_c2` say whether `c1`/`c2` are defined.
 */
typedef struct {
  double k;
  double z;
  double z_threshold;
  double d0;
  double d1;
  double c1;
  double c2;
  bool has_c1;
  bool has_c2;
  double threshold;
  bool nonexistence_applies;
  bool existence_applies;
} CritwellTheory;

typedef struct {
  double l;
  size_t nx;
  size_t n_modes;
  double eig_tol;
  size_t max_iter;
  CritwellBackend backend;
  bool adapt_l;
  size_t k;
  size_t max_unknowns;
} CritwellSolverOptions;

/**
 * Summary diagnostics of the lowest eigenpair.
 */
typedef struct {
  double threshold;
  double gap;
  double localization;
  double residual;
  bool is_bound_state;
  double l_used;
  double h;
} CritwellSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the next
 * failing call on the same thread.
 */
const char *critwell_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *critwell_version(void);

/**
 * # Safety
 * `out` must be valid for writing a pointer.
 */
CritwellStatus critwell_profile_new(CritwellProfileKind kind,
                                    double b,
                                    double amplitude,
                                    CritwellProfile **out);

/**
 * Tabulated profile from a two-column `x f` file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for writing.
 */
CritwellStatus critwell_profile_from_table(const char *path,
                                           double amplitude,
                                           CritwellProfile **out);

/**
 * # Safety
 * `p` must come from a `critwell_profile_*` constructor and not be used
 * afterwards. NULL is ignored.
 */
void critwell_profile_free(CritwellProfile *p);

/**
 * `f`, `f′`, `f″` at `x`.
 *
 * # Safety
 * `p` must be a live profile; the output pointers must be valid.
 */
CritwellStatus critwell_profile_eval(const CritwellProfile *p,
                                     double x,
                                     double *f,
                                     double *df,
                                     double *d2f);

/**
 * `‖f‖²` and `‖f′‖²`.
 *
 * # Safety
 * `p` must be a live profile; the output pointers must be valid.
 */
CritwellStatus critwell_profile_norms(const CritwellProfile *p, double *normf2, double *normfp2);

/**
 * Theory constants for width `a` and the profile's support at `lambda`.
 *
 * # Safety
 * `p` must be a live profile; `out` must be valid for writing.
 */
CritwellStatus critwell_theory(double a,
                               const CritwellProfile *p,
                               double lambda,
                               CritwellTheory *out);

/**
 * Default options for width `a` and half-support `b`: `L = b + 10a`,
 * spacing `a/40`, 10 modes.
 *
 * # Safety
 * `out` must be valid for writing.
 */
CritwellStatus critwell_solver_options_default(double a, double b, CritwellSolverOptions *out);

/**
 * Lowest eigenvalues on the strip of width `a` deformed by `lambda·f`.
 * `opts` may be NULL for the defaults.
 *
 * # Safety
 * `p` must be a live profile, `opts` NULL or valid, `out` valid for writing.
 */
CritwellStatus critwell_solve(double a,
                              const CritwellProfile *p,
                              double lambda,
                              const CritwellSolverOptions *opts,
                              CritwellSpectrum **out);

/**
 * # Safety
 * `s` must come from [`critwell_solve`] and not be used afterwards. NULL is
 * ignored.
 */
void critwell_spectrum_free(CritwellSpectrum *s);

/**
 * Number of computed eigenvalues; 0 for NULL.
 *
 * # Safety
 * `s` must be NULL or a live spectrum.
 */
size_t critwell_spectrum_len(const CritwellSpectrum *s);

/**
 * Eigenvalue `i` (ascending, 0-based).
 *
 * # Safety
 * `s` must be a live spectrum; `out` must be valid for writing.
 */
CritwellStatus critwell_spectrum_eigenvalue(const CritwellSpectrum *s, size_t i, double *out);

/**
 * # Safety
 * `s` must be a live spectrum; `out` must be valid for writing.
 */
CritwellStatus critwell_spectrum_summary(const CritwellSpectrum *s, CritwellSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRITWELL_H */
