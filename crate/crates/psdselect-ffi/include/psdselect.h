#ifndef PSDSELECT_H
#define PSDSELECT_H

/* Generated by cbindgen from the psdselect-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible entry point.
 */
typedef enum PselStatus {
  /**
   * Call succeeded.
   */
  PSEL_STATUS_OK = 0,
  /**
   * Rejected configuration or arguments.
   */
  PSEL_STATUS_CONFIG = 1,
  /**
   * Numerical failure while computing.
   */
  PSEL_STATUS_NUMERICAL = 2,
  /**
   * A required pointer was null.
   */
  PSEL_STATUS_NULL_ARGUMENT = 3,
  /**
   * Internal panic caught at the boundary.
   */
  PSEL_STATUS_PANIC = 4,
} PselStatus;

/**
 * Candidate-model catalog built from a JSON description.
 */
typedef struct PselCatalog PselCatalog;

/**
 * Selection result: per-model probabilities and the winning id.
 */
typedef struct PselPosterior PselPosterior;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on the calling thread. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *psel_last_error(void);

/**
 * Builds a catalog from the same JSON object the CLI configs use under
 * `"catalog"`: width, height, image_kinds, noise_kinds, and optional
 * blur_width, blur_psf, and hyperprior. On success writes a handle to
 * `out`; release it with [`psel_catalog_free`].
 *
 * # Safety
 * `json` must point to a NUL-terminated string; `out` must be valid
 * for one pointer write.
 */
enum PselStatus psel_catalog_from_json(const char *json, struct PselCatalog **out);

/**
 * Releases a catalog handle; a null handle is a no-op.
 *
 * # Safety
 * `catalog` must be null or a pointer returned by
 * [`psel_catalog_from_json`] that has not been freed yet.
 */
void psel_catalog_free(struct PselCatalog *catalog);

/**
 * Number of candidate models; 0 for a null handle.
 *
 * # Safety
 * `catalog` must be null or a live catalog handle.
 */
size_t psel_catalog_models(const struct PselCatalog *catalog);

/**
 * Pixels per image (`width * height`), the length every buffer below
 * must have; 0 for a null handle.
 *
 * # Safety
 * `catalog` must be null or a live catalog handle.
 */
size_t psel_catalog_pixels(const struct PselCatalog *catalog);

/**
 * Draws one synthetic scene and observation from catalog model
 * `model_id` at precisions (`gamma_x`, `gamma_e`). `observation` is
 * required; pass a null `image` to skip the ground-truth copy. Both
 * buffers hold `len == psel_catalog_pixels` doubles.
 *
 * # Safety
 * `catalog` must be a live catalog handle; non-null buffers must be
 * valid for `len` double writes.
 */
enum PselStatus psel_generate(const struct PselCatalog *catalog,
                              size_t model_id,
                              double gamma_x,
                              double gamma_e,
                              uint64_t seed,
                              double *image,
                              double *observation,
                              size_t len);

/**
 * Ranks every catalog model on one observation: runs a Gibbs chain of
 * `iterations` sweeps per candidate (one tenth burn-in), combines the
 * evidences with the catalog's model priors, and writes a posterior
 * handle to `out`. Candidates run sequentially on the calling thread.
 *
 * # Safety
 * `catalog` must be a live catalog handle, `observation` valid for
 * `len` double reads, and `out` valid for one pointer write.
 */
enum PselStatus psel_select(const struct PselCatalog *catalog,
                            const double *observation,
                            size_t len,
                            size_t iterations,
                            uint64_t seed,
                            struct PselPosterior **out);

/**
 * Integrates one model's evidence on the default quadrature grid and
 * writes the log value to `out`.
 *
 * # Safety
 * `catalog` must be a live catalog handle, `observation` valid for
 * `len` double reads, and `out` valid for one double write.
 */
enum PselStatus psel_log_evidence_quadrature(const struct PselCatalog *catalog,
                                             size_t model_id,
                                             const double *observation,
                                             size_t len,
                                             double *out);

/**
 * Releases a posterior handle; a null handle is a no-op.
 *
 * # Safety
 * `posterior` must be null or a pointer returned by [`psel_select`]
 * that has not been freed yet.
 */
void psel_posterior_free(struct PselPosterior *posterior);

/**
 * Number of ranked models; 0 for a null handle.
 *
 * # Safety
 * `posterior` must be null or a live posterior handle.
 */
size_t psel_posterior_models(const struct PselPosterior *posterior);

/**
 * Winning model id; 0 for a null handle.
 *
 * # Safety
 * `posterior` must be null or a live posterior handle.
 */
size_t psel_posterior_selected(const struct PselPosterior *posterior);

/**
 * Model id at `index` in ranking storage order; 0 when out of range.
 *
 * # Safety
 * `posterior` must be null or a live posterior handle.
 */
size_t psel_posterior_model_id(const struct PselPosterior *posterior, size_t index);

/**
 * Posterior probability at `index`; NaN when out of range.
 *
 * # Safety
 * `posterior` must be null or a live posterior handle.
 */
double psel_posterior_probability(const struct PselPosterior *posterior, size_t index);

/**
 * Log evidence at `index`; NaN when out of range.
 *
 * # Safety
 * `posterior` must be null or a live posterior handle.
 */
double psel_posterior_log_evidence(const struct PselPosterior *posterior, size_t index);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSDSELECT_H */
