#ifndef MPI_FUSION_H
#define MPI_FUSION_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MfStatus {
  MF_STATUS_OK = 0,
  MF_STATUS_NULL_POINTER = 1,
  MF_STATUS_INVALID_ARGUMENT = 2,
  MF_STATUS_IO = 3,
  MF_STATUS_FORMAT = 4,
  /**
   * A caller buffer has the wrong length.
   */
  MF_STATUS_BUFFER_SIZE = 5,
  MF_STATUS_INFEASIBLE = 6,
  MF_STATUS_PANIC = 7,
} MfStatus;

typedef enum MfBlendKind {
  MF_BLEND_KIND_IRREGULAR = 0,
  MF_BLEND_KIND_GRID = 1,
} MfBlendKind;

typedef enum MfPlanTarget {
  /**
   * `target_value` is the rendering width in pixels.
   */
  MF_PLAN_TARGET_WIDTH = 0,
  /**
   * `target_value` is the number of views.
   */
  MF_PLAN_TARGET_VIEWS = 1,
} MfPlanTarget;

typedef struct MfCamera MfCamera;

typedef struct MfMpi MfMpi;

typedef struct MfCapturePlan {
  uint64_t views;
  uint64_t per_side;
  /**
   * Meters.
   */
  double delta_u;
  uint64_t width_px;
  double focal_px;
  /**
   * Pixels between adjacent views at the nearest depth.
   */
  double max_disparity;
  uint64_t planes;
  uint64_t render_ops_per_mpi;
  uint64_t storage_samples;
} MfCapturePlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a
 * successful call. Valid until the next call into this library.
 */
const char *mf_last_error_message(void);

/**
 * Creates a camera. `rotation` is the row-major 3x3 camera-to-world
 * rotation and `center` the camera position in world coordinates.
 *
 * # Safety
 * `rotation` must point to 9 doubles, `center` to 3, `out` to writable
 * storage for one pointer.
 */
enum MfStatus mf_camera_new(double focal_px,
                            uint32_t width,
                            uint32_t height,
                            double principal_x,
                            double principal_y,
                            const double *rotation,
                            const double *center,
                            struct MfCamera **out);

/**
 * # Safety
 * `camera` must come from this library and not be used afterwards.
 */
void mf_camera_free(struct MfCamera *camera);

/**
 * Builds an MPI from `planes` straight-alpha RGBA `f32` planes stored far
 * to near, each `height x width x 4`, with ascending `disparities`.
 *
 * # Safety
 * `rgba` must hold `planes * width * height * 4` floats and `disparities`
 * `planes` doubles for the camera's raster.
 */
enum MfStatus mf_mpi_new(const struct MfCamera *camera,
                         const double *disparities,
                         size_t planes,
                         const float *rgba,
                         size_t rgba_len,
                         struct MfMpi **out);

/**
 * Reads an MPI bundle file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum MfStatus mf_mpi_import(const char *path_utf8, struct MfMpi **out);

/**
 * Writes an MPI bundle file.
 *
 * # Safety
 * `mpi` must be a live handle and `path` a NUL-terminated string.
 */
enum MfStatus mf_mpi_export(const struct MfMpi *mpi, const char *path_utf8);

/**
 * # Safety
 * `mpi` must come from this library and not be used afterwards.
 */
void mf_mpi_free(struct MfMpi *mpi);

/**
 * # Safety
 * `mpi` must be a live handle; the out pointers must be writable.
 */
enum MfStatus mf_mpi_dims(const struct MfMpi *mpi,
                          uint32_t *width,
                          uint32_t *height,
                          uint32_t *planes);

/**
 * Copy of the MPI's reference camera.
 *
 * # Safety
 * `mpi` must be a live handle and `out` writable.
 */
enum MfStatus mf_mpi_camera(const struct MfMpi *mpi, struct MfCamera **out);

/**
 * Renders one MPI into `target`: premultiplied RGB (`W*H*3`) and
 * accumulated alpha (`W*H`) on the target raster. `alpha` may be null.
 *
 * # Safety
 * Handles must be live; buffers must hold the stated lengths.
 */
enum MfStatus mf_mpi_render(const struct MfMpi *mpi,
                            const struct MfCamera *target,
                            double *rgb,
                            size_t rgb_len,
                            double *alpha,
                            size_t alpha_len);

/**
 * Blends `count` MPIs into `target`. Irregular mode uses `neighbors`
 * nearest MPIs with the falloff derived from the first MPI's focal length,
 * plane count and nearest depth; grid mode ignores `neighbors`.
 * `coverage` (`W*H`) may be null.
 *
 * # Safety
 * `mpis` must hold `count` live handles; buffers must hold the stated
 * lengths.
 */
enum MfStatus mf_render_novel_view(const struct MfMpi *const *mpis,
                                   size_t count,
                                   const struct MfCamera *target,
                                   enum MfBlendKind blend,
                                   size_t neighbors,
                                   double *rgb,
                                   size_t rgb_len,
                                   double *coverage,
                                   size_t coverage_len);

/**
 * Capture plan for a square view plane of side `side` meters.
 * `max_disparity <= 0` selects the default cap of 64 px.
 *
 * # Safety
 * `out` must be writable.
 */
enum MfStatus mf_capture_plan(double theta_rad,
                              double side,
                              double z_min,
                              enum MfPlanTarget target,
                              uint64_t target_value,
                              double max_disparity,
                              struct MfCapturePlan *out);

/**
 * PSNR in dB of two `W*H*channels` images with data range 1; identical
 * images give +infinity.
 *
 * # Safety
 * `a` and `b` must each hold `width * height * channels` doubles.
 */
enum MfStatus mf_psnr(const double *a,
                      const double *b,
                      uint32_t width,
                      uint32_t height,
                      uint32_t channels,
                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MPI_FUSION_H */
