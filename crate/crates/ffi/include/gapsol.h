#ifndef GAPSOL_H
#define GAPSOL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GapsolStatus {
  GAPSOL_STATUS_OK = 0,
  GAPSOL_STATUS_NULL_POINTER = -1,
  GAPSOL_STATUS_INVALID = -2,
  GAPSOL_STATUS_DEGENERATE = -3,
  GAPSOL_STATUS_NUMERICAL = -4,
  GAPSOL_STATUS_PANIC = -5,
  GAPSOL_STATUS_CAPACITY = -6,
} GapsolStatus;

typedef enum GapsolDispersionModel {
  GAPSOL_DISPERSION_MODEL_KLEIN_GORDON = 0,
  GAPSOL_DISPERSION_MODEL_REGULARIZED_GP = 1,
  GAPSOL_DISPERSION_MODEL_DISCRETE_GP = 2,
} GapsolDispersionModel;

/**
 * Opaque root atlas.
 */
typedef struct GapsolAtlas GapsolAtlas;

/**
 * Opaque closed-form soliton.
 */
typedef struct GapsolSoliton GapsolSoliton;

/**
 * Envelopes `a`, `b` of the soliton at one point.
 */
typedef struct GapsolProfile {
  double re_a;
  double im_a;
  double re_b;
  double im_b;
  /**
   * Modulus of the coupled-mode residual at this point.
   */
  double residual;
} GapsolProfile;

typedef struct GapsolRootEntry {
  int32_t m;
  double re_kappa_plus;
  double im_kappa_plus;
  double re_kappa_minus;
  double im_kappa_minus;
} GapsolRootEntry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next call on the same thread.
 */
const char *gapsol_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *gapsol_version(void);

/**
 * Builds the soliton for `(n, c, omega, sigma, w2n)`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum GapsolStatus gapsol_soliton_new(int32_t n,
                                     double c,
                                     double omega,
                                     int32_t sigma,
                                     double w2n,
                                     struct GapsolSoliton **out);

/**
 * # Safety
 * `h` must come from [`gapsol_soliton_new`] and not be used afterwards; null is ignored.
 */
void gapsol_soliton_free(struct GapsolSoliton *h);

/**
 * Decay rate of the envelopes in the slow co-moving variable.
 *
 * # Safety
 * `h` must be a live soliton handle and `out` valid for a write.
 */
enum GapsolStatus gapsol_soliton_decay_rate(const struct GapsolSoliton *h, double *out);

/**
 * Envelopes and residual at slow coordinate `y`.
 *
 * # Safety
 * `h` must be a live soliton handle and `out` valid for a write.
 */
enum GapsolStatus gapsol_soliton_profile(const struct GapsolSoliton *h,
                                         double y,
                                         struct GapsolProfile *out);

/**
 * Spatial roots for the modes of the parity of `n` in `[m_min, m_max]`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum GapsolStatus gapsol_atlas_new(int32_t n,
                                   double c,
                                   int32_t m_min,
                                   int32_t m_max,
                                   struct GapsolAtlas **out);

/**
 * # Safety
 * `h` must come from [`gapsol_atlas_new`] and not be used afterwards; null is ignored.
 */
void gapsol_atlas_free(struct GapsolAtlas *h);

/**
 * # Safety
 * `h` must be a live atlas handle and `out` valid for a write.
 */
enum GapsolStatus gapsol_atlas_len(const struct GapsolAtlas *h, size_t *out);

/**
 * # Safety
 * `h` must be a live atlas handle and `out` valid for a write.
 */
enum GapsolStatus gapsol_atlas_entry(const struct GapsolAtlas *h,
                                     size_t index,
                                     struct GapsolRootEntry *out);

/**
 * Roots of a model dispersion relation for mode `m`. Writes up to `capacity`
 * roots into `re`/`im` and the total count into `len`; returns `Capacity`
 * when the buffers are too short.
 *
 * # Safety
 * `re` and `im` must be valid for `capacity` writes and `len` for one.
 */
enum GapsolStatus gapsol_dispersion_roots(enum GapsolDispersionModel model,
                                          double omega,
                                          double c,
                                          int32_t m,
                                          double *re,
                                          double *im,
                                          size_t capacity,
                                          size_t *len);

/**
 * Modulus of the characteristic function at `kappa`.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum GapsolStatus gapsol_dispersion_residual(enum GapsolDispersionModel model,
                                             double omega,
                                             double c,
                                             int32_t m,
                                             double re,
                                             double im,
                                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAPSOL_H */
