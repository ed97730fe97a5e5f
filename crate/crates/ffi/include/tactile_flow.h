#ifndef TACTILE_FLOW_H
#define TACTILE_FLOW_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_POINTER = 1,
  TF_STATUS_INVALID_ARGUMENT = 2,
  TF_STATUS_DIMENSIONS = 3,
  TF_STATUS_NON_FINITE = 4,
  TF_STATUS_IO = 5,
  TF_STATUS_FORMAT = 6,
  TF_STATUS_DIVERGED = 7,
  TF_STATUS_BUFFER_TOO_SMALL = 8,
  TF_STATUS_PANIC = 99,
} TfStatus;

// A taxel layout together with the rasterization settings used for it.
typedef struct TfLayout TfLayout;

typedef struct TfModel TfModel;

// Dense flow parameters; see [`tf_flow_config_default`].
typedef struct TfFlowConfig {
  size_t pyramid_levels;
  double pyramid_scale;
  size_t window_size;
  size_t poly_n;
  double poly_sigma;
  size_t iterations;
} TfFlowConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *tf_version(void);

// Message for the most recent failure on this thread, or NULL. Valid until
// the next library call on the same thread.
const char *tf_last_error(void);

struct TfFlowConfig tf_flow_config_default(void);

// Rectangular grid layout with `pitch_mm` spacing.
enum TfStatus tf_layout_grid(size_t rows, size_t cols, double pitch_mm, struct TfLayout **out);

// Arbitrary layout from `n` taxel centres in millimetres; ids are `0..n`.
enum TfStatus tf_layout_from_points(const double *x_mm,
                                    const double *y_mm,
                                    size_t n,
                                    double pitch_mm,
                                    struct TfLayout **out);

void tf_layout_free(struct TfLayout *layout);

size_t tf_layout_len(const struct TfLayout *layout);

// Output image size for [`tf_rasterize`].
enum TfStatus tf_layout_image_dims(const struct TfLayout *layout, size_t *width, size_t *height);

// Sets a uniform baseline and response range for raw-value normalization.
enum TfStatus tf_layout_set_normalization(struct TfLayout *layout,
                                          double baseline,
                                          double response_range);

// Rasterizes one frame of raw taxel values (one per taxel, in layout
// order) into `pixels`, which must hold `capacity >= width * height`.
enum TfStatus tf_rasterize(const struct TfLayout *layout,
                           const double *values,
                           size_t n_values,
                           double *pixels,
                           size_t capacity);

// Dense flow from `prev` to `curr`, both `width * height`. `config` may be
// NULL for defaults. Writes `u` and `v`, each `width * height`.
enum TfStatus tf_flow(const double *prev,
                      const double *curr,
                      size_t width,
                      size_t height,
                      const struct TfFlowConfig *config,
                      double *u,
                      double *v);

// Three-channel frame from a pressure image and the flow that ends at it.
// `rgb` receives `3 * width * height` values, channel-planar in the order
// pressure, magnitude, direction.
enum TfStatus tf_augment(const double *pressure,
                         const double *u,
                         const double *v,
                         size_t width,
                         size_t height,
                         double v_max,
                         double *rgb);

// Loads a classifier saved as JSON by the `tactile train` command.
enum TfStatus tf_model_load(const char *path, struct TfModel **out);

void tf_model_free(struct TfModel *model);

// Frames per classified window, or 0 for NULL.
size_t tf_model_window_len(const struct TfModel *model);

// Channels the model reads from each frame: 1 (pressure) or 3.
size_t tf_model_channels(const struct TfModel *model);

// Classifies a window of `tf_model_window_len` frames. `frames` holds, for
// each frame in order, the three channel planes written by [`tf_augment`];
// pressure-only models read just the first plane of each frame. Writes the
// class index (Grasp, TwoHandGrasp, Twist, Push, Pull) and, if `probs` is
// not NULL, five class probabilities.
enum TfStatus tf_model_classify(const struct TfModel *model,
                                const double *frames,
                                size_t width,
                                size_t height,
                                uint32_t *class_index,
                                double *probs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TACTILE_FLOW_H */
