#ifndef CURVEREG_H
#define CURVEREG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CrStatus {
  CR_STATUS_OK = 0,
  CR_STATUS_NULL_ARGUMENT = 1,
  CR_STATUS_INVALID_ARGUMENT = 2,
  CR_STATUS_IO = 3,
  CR_STATUS_PARSE = 4,
  CR_STATUS_GEOMETRY = 5,
  CR_STATUS_NO_HYPOTHESIS = 6,
  CR_STATUS_PANIC = 7,
} CrStatus;

typedef enum CrTermination {
  CR_TERMINATION_INLIER_TARGET = 0,
  CR_TERMINATION_TIME_BUDGET = 1,
  CR_TERMINATION_EXHAUSTED = 2,
} CrTermination;

/**
 * Opaque surface index.
 */
typedef struct CrIndex CrIndex;

/**
 * Search settings. Non-positive `inlier_threshold` and `eps` select the
 * defaults derived from the target diameter and `sigma`.
 */
typedef struct CrParams {
  double max_time;
  double target_inlier_ratio;
  double inlier_threshold;
  double eps;
  double sigma;
  uint64_t seed;
  /**
   * Half-width of the tangent smoothing window, in samples.
   */
  size_t tangent_window;
} CrParams;

typedef struct CrResult {
  /**
   * Row-major rotation mapping source into target coordinates.
   */
  double rotation[9];
  double translation[3];
  size_t inlier_count;
  double inlier_ratio;
  size_t hypotheses_tested;
  double elapsed;
  enum CrTermination terminated_by;
} CrResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * Valid until the next call on the same thread.
 */
const char *cr_last_error(void);

/**
 * Static description of a status code.
 */
const char *cr_status_str(enum CrStatus status);

/**
 * Defaults: 5 s budget, 95% inlier target, noise-free tolerances.
 */
struct CrParams cr_params_default(void);

/**
 * Builds an index over `n` surface points (3 doubles each). `normals` may
 * be null, in which case they are estimated from the points. A
 * `subsample` of 0 selects the default size.
 */
enum CrStatus cr_index_build(const double *points,
                             const double *normals,
                             size_t n,
                             size_t subsample,
                             struct CrIndex **out);

enum CrStatus cr_index_load(const char *path, struct CrIndex **out);

enum CrStatus cr_index_save(const struct CrIndex *index, const char *path);

/**
 * Number of subsampled points the index refers to, or 0 for null.
 */
size_t cr_index_point_count(const struct CrIndex *index);

/**
 * Releases an index; null is ignored.
 */
void cr_index_free(struct CrIndex *index);

/**
 * Registers a curve onto the indexed surface. The curve is `n_segments`
 * polylines stored back to back in `points`.
 */
enum CrStatus cr_register_curve_surface(const struct CrIndex *index,
                                        const double *points,
                                        const size_t *segment_lengths,
                                        size_t n_segments,
                                        const struct CrParams *params,
                                        struct CrResult *out);

/**
 * Registers a source curve onto a target curve.
 */
enum CrStatus cr_register_curve_curve(const double *source_points,
                                      const size_t *source_segment_lengths,
                                      size_t source_segments,
                                      const double *target_points,
                                      const size_t *target_segment_lengths,
                                      size_t target_segments,
                                      const struct CrParams *params,
                                      struct CrResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CURVEREG_H */
