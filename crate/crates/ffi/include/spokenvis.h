#ifndef SPOKENVIS_H
#define SPOKENVIS_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SvStatus {
  SV_STATUS_OK = 0,
  SV_STATUS_NULL_POINTER = 1,
  SV_STATUS_INVALID_ARGUMENT = 2,
  SV_STATUS_IO = 3,
  SV_STATUS_FORMAT = 4,
  SV_STATUS_SHAPE = 5,
  SV_STATUS_DATA = 6,
  SV_STATUS_CONFIG = 7,
  SV_STATUS_INTERNAL = 8,
  SV_STATUS_PANIC = 9,
} SvStatus;

/**
 * Alignment model plus whether word vectors are unit-normalized.
 */
typedef struct SvAlignModel SvAlignModel;

typedef struct SvWordCnn SvWordCnn;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next spokenvis call on this thread.
 */
const char *sv_last_error(void);

/**
 * Loads an alignment bundle directory.
 *
 * # Safety
 * `dir` must be a valid C string and `out` a valid pointer.
 */
enum SvStatus sv_align_model_load(const char *dir, struct SvAlignModel **out);

/**
 * # Safety
 * `model` must come from [`sv_align_model_load`] and not be used again.
 */
void sv_align_model_free(struct SvAlignModel *model);

/**
 * Joint dimension `h`, region dimension and word dimension. Any output
 * pointer may be null.
 *
 * # Safety
 * `model` must be a live handle; non-null outputs must be valid.
 */
enum SvStatus sv_align_model_dims(const struct SvAlignModel *model,
                                  size_t *h,
                                  size_t *d_i,
                                  size_t *d_w);

/**
 * Image-caption score for `n_regions × d_I` regions and `n_words × d_W`
 * word vectors.
 *
 * # Safety
 * Buffers must hold the stated number of doubles; `out` must be valid.
 */
enum SvStatus sv_align_similarity(const struct SvAlignModel *model,
                                  const double *regions,
                                  size_t n_regions,
                                  const double *words,
                                  size_t n_words,
                                  double *out);

/**
 * Best region and its score for every word. Scores at or below zero mean
 * the word is not linked.
 *
 * # Safety
 * Buffers must hold the stated number of values; `region_index` and
 * `score` must each hold `n_words` entries.
 */
enum SvStatus sv_align_infer(const struct SvAlignModel *model,
                             const double *regions,
                             size_t n_regions,
                             const double *words,
                             size_t n_words,
                             size_t *region_index,
                             double *score);

/**
 * Loads a word-classifier bundle directory.
 *
 * # Safety
 * `dir` must be a valid C string and `out` a valid pointer.
 */
enum SvStatus sv_word_cnn_load(const char *dir, struct SvWordCnn **out);

/**
 * # Safety
 * `cnn` must come from [`sv_word_cnn_load`] and not be used again.
 */
void sv_word_cnn_free(struct SvWordCnn *cnn);

/**
 * Input grid and word-vector length. Any output pointer may be null.
 *
 * # Safety
 * `cnn` must be a live handle; non-null outputs must be valid.
 */
enum SvStatus sv_word_cnn_dims(const struct SvWordCnn *cnn,
                               size_t *n_bands,
                               size_t *n_frames,
                               size_t *embed_dim);

/**
 * Word vector for one `n_bands × n_frames` spectrogram.
 *
 * # Safety
 * `spectrogram` must hold `n_bands * n_frames` doubles and `out` at least
 * `out_len`.
 */
enum SvStatus sv_word_cnn_embed(const struct SvWordCnn *cnn,
                                const double *spectrogram,
                                size_t n_bands,
                                size_t n_frames,
                                double *out,
                                size_t out_len);

/**
 * Fixed-size log-mel spectrogram of mono samples in [-1, 1] with the
 * default frontend (16 kHz, 40 bands × 100 frames, band-major).
 *
 * # Safety
 * `samples` must hold `n_samples` doubles and `out` at least `out_len`.
 */
enum SvStatus sv_featurize(const double *samples,
                           size_t n_samples,
                           uint32_t sample_rate,
                           double *out,
                           size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPOKENVIS_H */
