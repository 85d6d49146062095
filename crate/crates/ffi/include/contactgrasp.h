#ifndef CONTACTGRASP_H
#define CONTACTGRASP_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CgStatus {
  CG_STATUS_OK = 0,
  CG_STATUS_INVALID_ARGUMENT = 1,
  CG_STATUS_IO = 2,
  CG_STATUS_FORMAT = 3,
  CG_STATUS_GEOMETRY = 4,
  CG_STATUS_DIMENSION_MISMATCH = 5,
  CG_STATUS_CHECKSUM = 6,
  CG_STATUS_CONFIG = 7,
  CG_STATUS_NULL_POINTER = 8,
  CG_STATUS_PANIC = 9,
} CgStatus;

typedef struct CgMesh CgMesh;

typedef struct CgProposals CgProposals;

typedef struct CgTensor CgTensor;

typedef struct CgDecodeParams {
  double gamma;
  uint32_t peak_distance;
  uint32_t max_proposals;
  double max_width;
  /**
   * 0 for contact-anchored tensors, 1 for grasp-center tensors.
   */
  uint32_t representation;
} CgDecodeParams;

typedef struct CgIntrinsics {
  double fx;
  double fy;
  double cx;
  double cy;
  uint32_t width;
  uint32_t height;
} CgIntrinsics;

typedef struct CgTransform {
  double rotation[4];
  double translation[3];
} CgTransform;

typedef struct CgProposal {
  double tcp[3];
  double rotation[4];
  double width;
  double quality;
  uint32_t pixel[2];
  bool width_clamped;
} CgProposal;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cg_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cg_version(void);

/**
 * Defaults of the decoder and the gripper.
 */
struct CgDecodeParams cg_decode_params_default(void);

/**
 * Loads an OBJ or STL mesh.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum CgStatus cg_mesh_load(const char *path, struct CgMesh **out);

/**
 * Builds a mesh from `n_vertices` xyz triples and `n_faces` index triples.
 *
 * # Safety
 * The arrays must hold `3 * n_vertices` and `3 * n_faces` elements.
 */
enum CgStatus cg_mesh_from_arrays(const double *vertices,
                                  size_t n_vertices,
                                  const uint32_t *faces,
                                  size_t n_faces,
                                  struct CgMesh **out);

/**
 * # Safety
 * `mesh` must come from this library and not be used afterwards.
 */
void cg_mesh_free(struct CgMesh *mesh);

/**
 * Enclosed volume in cubic meters.
 *
 * # Safety
 * `mesh` must be a live handle; `out` must be writable.
 */
enum CgStatus cg_mesh_volume(const struct CgMesh *mesh, double *out);

/**
 * Writes up to `capacity` stable-pose probabilities (descending) into
 * `probabilities` and the total number of poses into `count`. Pass a NULL
 * buffer to query the count only.
 *
 * # Safety
 * `probabilities` must hold `capacity` values when not NULL.
 */
enum CgStatus cg_mesh_stable_poses(const struct CgMesh *mesh,
                                   size_t max_poses,
                                   double *probabilities,
                                   size_t capacity,
                                   size_t *count);

/**
 * Reads a tensor file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum CgStatus cg_tensor_read(const char *path, struct CgTensor **out);

/**
 * Wraps a channel-major `channels x height x width` float array.
 *
 * # Safety
 * `data` must hold `channels * height * width` values.
 */
enum CgStatus cg_tensor_from_data(const float *data,
                                  size_t channels,
                                  size_t height,
                                  size_t width,
                                  struct CgTensor **out);

/**
 * # Safety
 * `tensor` must be a live handle; the outputs must be writable.
 */
enum CgStatus cg_tensor_dims(const struct CgTensor *tensor,
                             size_t *channels,
                             size_t *height,
                             size_t *width);

/**
 * # Safety
 * `tensor` must come from this library and not be used afterwards.
 */
void cg_tensor_free(struct CgTensor *tensor);

/**
 * Decodes grasp proposals in the base frame, best first. `depth` is the
 * row-major z-depth image matching `intrinsics`; `extrinsics` maps camera
 * to base coordinates.
 *
 * # Safety
 * `depth` must hold `width * height` values; all pointers must be valid.
 */
enum CgStatus cg_decode(const struct CgTensor *tensor,
                        const struct CgIntrinsics *intrinsics,
                        const float *depth,
                        const struct CgTransform *extrinsics,
                        const struct CgDecodeParams *params,
                        struct CgProposals **out);

/**
 * Number of proposals; 0 for NULL.
 *
 * # Safety
 * `proposals` must be NULL or a live handle.
 */
size_t cg_proposals_len(const struct CgProposals *proposals);

/**
 * # Safety
 * `proposals` must be a live handle; `out` must be writable.
 */
enum CgStatus cg_proposals_get(const struct CgProposals *proposals,
                               size_t index,
                               struct CgProposal *out);

/**
 * # Safety
 * `proposals` must come from this library and not be used afterwards.
 */
void cg_proposals_free(struct CgProposals *proposals);

/**
 * Generates a dataset from a mesh directory. `config_path` may be NULL
 * for the defaults; `seed` overrides the configured seed.
 *
 * # Safety
 * Non-NULL strings must be NUL-terminated.
 */
enum CgStatus cg_generate(const char *meshes_dir,
                          const char *out_dir,
                          const char *config_path,
                          uint64_t seed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONTACTGRASP_H */
