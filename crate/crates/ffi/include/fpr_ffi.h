#ifndef FPR_FFI_H
#define FPR_FFI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of an LP solve, mirrors the core status.
 */
typedef enum FprLpStatus {
  FPR_LP_STATUS_OPTIMAL = 0,
  FPR_LP_STATUS_INFEASIBLE = 1,
  FPR_LP_STATUS_UNBOUNDED = 2,
  FPR_LP_STATUS_FAILED = 3,
} FprLpStatus;

/**
 * Result code of every call.
 */
typedef enum FprStatus {
  FPR_STATUS_OK = 0,
  FPR_STATUS_NULL_ARGUMENT = 1,
  FPR_STATUS_INVALID_UTF8 = 2,
  FPR_STATUS_IO = 3,
  FPR_STATUS_SCHEMA = 4,
  FPR_STATUS_TOPOLOGY = 5,
  FPR_STATUS_CATALOG = 6,
  FPR_STATUS_INVALID = 7,
  FPR_STATUS_UNPLANNABLE = 8,
  FPR_STATUS_DIVERGENCE = 9,
  FPR_STATUS_INFEASIBLE = 10,
  FPR_STATUS_INTERNAL = 11,
  FPR_STATUS_PANIC = 12,
} FprStatus;

/**
 * Opaque grid model.
 */
typedef struct FprNetwork FprNetwork;

/**
 * Opaque feasible operation region.
 */
typedef struct FprPolygon FprPolygon;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * Valid until the next call on the same thread.
 */
const char *fpr_last_error(void);

/**
 * Library version as a static string.
 */
const char *fpr_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void fpr_string_free(char *s);

/**
 * Loads a grid JSON file resolved against an equipment catalog.
 *
 * # Safety
 * Paths must be NUL-terminated; `out_net` must be writable.
 */
enum FprStatus fpr_network_load(const char *grid_path,
                                const char *catalog_path,
                                struct FprNetwork **out_net);

/**
 * # Safety
 * `net` must come from [`fpr_network_load`] or be null.
 */
void fpr_network_free(struct FprNetwork *net);

/**
 * Number of buses in the grid.
 *
 * # Safety
 * `net` must be a live handle; `out_count` must be writable.
 */
enum FprStatus fpr_network_bus_count(const struct FprNetwork *net, size_t *out_count);

/**
 * Feasible operation region at the PCC, swept over `n_directions` directions.
 *
 * # Safety
 * `net` must be a live handle; `out_poly` must be writable.
 */
enum FprStatus fpr_for_compute(const struct FprNetwork *net,
                               size_t n_directions,
                               struct FprPolygon **out_poly);

/**
 * # Safety
 * `poly` must come from [`fpr_for_compute`] or be null.
 */
void fpr_polygon_free(struct FprPolygon *poly);

/**
 * Vertex count and enclosed area (MW x Mvar).
 *
 * # Safety
 * `poly` must be a live handle; outputs must be writable.
 */
enum FprStatus fpr_polygon_info(const struct FprPolygon *poly,
                                size_t *out_vertices,
                                double *out_area);

/**
 * Copies up to `len` vertices into `p_mw` and `q_mvar`.
 *
 * # Safety
 * Both buffers must hold `len` doubles.
 */
enum FprStatus fpr_polygon_vertices(const struct FprPolygon *poly,
                                    double *p_mw,
                                    double *q_mvar,
                                    size_t len);

/**
 * Region as JSON; free the result with [`fpr_string_free`].
 *
 * # Safety
 * `poly` must be a live handle; `out_json` must be writable.
 */
enum FprStatus fpr_polygon_to_json(const struct FprPolygon *poly, char **out_json);

/**
 * Solves an LP given in LP text format.
 *
 * # Safety
 * `lp_text` must be NUL-terminated; outputs must be writable.
 */
enum FprStatus fpr_lp_solve(const char *lp_text,
                            enum FprLpStatus *out_status,
                            double *out_objective);

/**
 * Runs the A/B study of a capacity expansion model file and returns the
 * report as JSON; free it with [`fpr_string_free`].
 *
 * # Safety
 * `model_path` must be NUL-terminated; `out_json` must be writable.
 */
enum FprStatus fpr_cep_study(const char *model_path, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FPR_FFI_H */
