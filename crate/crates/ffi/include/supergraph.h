#ifndef SUPERGRAPH_H
#define SUPERGRAPH_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_ARGUMENT = 1,
  SG_STATUS_INVALID_ARGUMENT = 2,
  SG_STATUS_DIMENSION = 3,
  SG_STATUS_NON_FINITE = 4,
  SG_STATUS_FORMAT = 5,
  SG_STATUS_DISCONNECTED = 6,
  SG_STATUS_CONFIG = 7,
  SG_STATUS_IO = 8,
  SG_STATUS_UTF8 = 9,
  SG_STATUS_BUFFER_TOO_SMALL = 10,
  SG_STATUS_OUT_OF_RANGE = 11,
  SG_STATUS_NO_FUSION = 12,
  SG_STATUS_PANIC = 13,
} SgStatus;

/**
 * Pipeline configuration.
 */
typedef struct SgConfig SgConfig;

/**
 * Decoded RGB or grayscale image.
 */
typedef struct SgImage SgImage;

/**
 * Result of a pipeline run: labels, per-scale embeddings and, for two
 * scales, the fused tree states.
 */
typedef struct SgRun SgRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *sg_last_error_message(void);

/**
 * Static, NUL-terminated version string.
 */
const char *sg_version(void);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum SgStatus sg_config_new(struct SgConfig **out);

/**
 * Configuration from a JSON document; missing keys take defaults.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum SgStatus sg_config_from_json(const char *json, struct SgConfig **out);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards.
 */
void sg_config_free(struct SgConfig *cfg);

/**
 * Image from interleaved 8-bit samples, row-major, `channels` 1 or 3.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` be writable.
 */
enum SgStatus sg_image_from_pixels(size_t width,
                                   size_t height,
                                   size_t channels,
                                   const uint8_t *data,
                                   size_t len,
                                   struct SgImage **out);

/**
 * Image from a binary PPM or PGM file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum SgStatus sg_image_load(const char *path, struct SgImage **out);

/**
 * # Safety
 * `img` must come from this library and not be used afterwards.
 */
void sg_image_free(struct SgImage *img);

/**
 * Runs segmentation, hierarchy and embedding on `img`; fuses the tree
 * when the configuration yields exactly two scales. The config's input
 * and output paths are ignored.
 *
 * # Safety
 * `img` and `cfg` must be live handles and `out` writable.
 */
enum SgStatus sg_run(const struct SgImage *img, const struct SgConfig *cfg, struct SgRun **out);

/**
 * # Safety
 * `run` must come from this library and not be used afterwards.
 */
void sg_run_free(struct SgRun *run);

/**
 * Raster size of the run's label map.
 *
 * # Safety
 * `run` must be live; `width` and `height` writable.
 */
enum SgStatus sg_run_size(const struct SgRun *run, size_t *width, size_t *height);

/**
 * Number of scales, counting the finest.
 *
 * # Safety
 * `run` must be live and `out` writable.
 */
enum SgStatus sg_run_scale_count(const struct SgRun *run, size_t *out);

/**
 * Node count of scale `scale`.
 *
 * # Safety
 * `run` must be live and `out` writable.
 */
enum SgStatus sg_run_node_count(const struct SgRun *run, size_t scale, size_t *out);

/**
 * Width of every embedding row.
 *
 * # Safety
 * `run` must be live and `out` writable.
 */
enum SgStatus sg_run_embedding_dim(const struct SgRun *run, size_t *out);

/**
 * Finest-scale region label of every pixel, row-major.
 *
 * # Safety
 * `run` must be live, `buf` writable for `capacity` elements, `len_out` writable.
 */
enum SgStatus sg_run_labels(const struct SgRun *run, size_t *buf, size_t capacity, size_t *len_out);

/**
 * Node embeddings of scale `scale`, row-major `nodes × dim`.
 *
 * # Safety
 * `run` must be live, `buf` writable for `capacity` elements, `len_out` writable.
 */
enum SgStatus sg_run_embeddings(const struct SgRun *run,
                                size_t scale,
                                double *buf,
                                size_t capacity,
                                size_t *len_out);

/**
 * Hidden state of the fused tree root. `SG_STATUS_NO_FUSION` when the run
 * has other than two scales.
 *
 * # Safety
 * `run` must be live, `buf` writable for `capacity` elements, `len_out` writable.
 */
enum SgStatus sg_run_root_state(const struct SgRun *run,
                                double *buf,
                                size_t capacity,
                                size_t *len_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUPERGRAPH_H */
