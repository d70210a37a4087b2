/* eeg2image: EEG-conditioned image synthesis toolkit.
 *
 * C interface to the training and evaluation core. Every object is an opaque
 * handle; every call returns a status code, with a thread-local message
 * available from e2i_last_error(). Handles are freed with the matching
 * *_free; freeing NULL is a no-op. Strings returned through char** outputs
 * are heap-allocated and released with e2i_string_free.
 */
#ifndef EEG2IMAGE_H
#define EEG2IMAGE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum e2i_status {
    E2I_OK = 0,
    E2I_E_USAGE = 1,        /* bad arguments to a call */
    E2I_E_FORMAT = 2,       /* malformed file or container */
    E2I_E_INTEGRITY = 3,    /* container inconsistent with its manifest */
    E2I_E_UNSUPPORTED = 4,  /* version or feature not supported */
    E2I_E_INVALID_DATA = 5, /* dataset violates an invariant */
    E2I_E_CONFIG = 6,       /* invalid configuration value */
    E2I_E_TRAINING = 7,     /* divergence or non-finite loss */
    E2I_E_IO = 8,           /* filesystem failure */
    E2I_E_SHAPE = 9,        /* tensor shape mismatch */
    E2I_E_MINING = 10,      /* batch cannot produce triplets */
    E2I_E_DEGENERATE = 11,  /* metric undefined on this input */
    E2I_E_INTERNAL = 12
} e2i_status;

typedef struct e2i_dataset e2i_dataset;
typedef struct e2i_encoder e2i_encoder;
typedef struct e2i_gan e2i_gan;

/* Message from the most recent failing call on this thread ("" if none). */
const char* e2i_last_error(void);

const char* e2i_version(void);

void e2i_string_free(char* s);

/* Named substream of a master seed; deterministic across platforms. */
uint64_t e2i_derive_seed(uint64_t master, const char* name);

/* Validates a run-config document (strict: unknown keys are errors), fills
 * defaults, derives per-stage seeds from the master seed, and returns the
 * resolved document. seed/out overrides are applied first when has_* is
 * nonzero. Section objects under "encoder"/"gan"/"synth" follow the same
 * schema the *_train calls accept. */
e2i_status e2i_run_config_normalize(const char* json_text, uint64_t seed_override,
                                    int has_seed_override, const char* out_override,
                                    char** resolved_json);

/* ------------------------------------------------------------------ data */

/* Deterministic synthetic EEG/image pairs (class-conditional sinusoids and
 * colored shapes). Identical arguments give a bit-identical dataset. */
e2i_status e2i_dataset_synth(int classes, int per_class, int channels, int timesteps,
                             int image_size, uint64_t seed, e2i_dataset** out);

e2i_status e2i_dataset_load(const char* dir, e2i_dataset** out);
e2i_status e2i_dataset_save(const e2i_dataset* ds, const char* dir);

/* info: any output pointer may be NULL. */
e2i_status e2i_dataset_info(const e2i_dataset* ds, int* classes, int* eeg_count,
                            int* image_count, int* channels, int* timesteps,
                            int* image_size);

void e2i_dataset_free(e2i_dataset* ds);

/* --------------------------------------------------------------- encoder */

/* Trains the recurrent feature extractor on the dataset's train split and
 * writes checkpoint + per-epoch CSV under out_dir. config_json uses the
 * "encoder" section schema of the run config ("{}" for defaults). */
e2i_status e2i_encoder_train(const e2i_dataset* ds, const char* config_json,
                             const char* out_dir, e2i_encoder** out);

e2i_status e2i_encoder_load(const char* ckpt_dir, e2i_encoder** out);
e2i_status e2i_encoder_save(const e2i_encoder* enc, const char* ckpt_dir);

/* Embeds `count` EEG windows laid out as [count, channels, timesteps] floats;
 * writes [count, out_dim] floats into `out` (caller-allocated). */
e2i_status e2i_encoder_embed(const e2i_encoder* enc, const float* eeg, int count,
                             int channels, int timesteps, float* out);

e2i_status e2i_encoder_out_dim(const e2i_encoder* enc, int* out_dim);

void e2i_encoder_free(e2i_encoder* enc);

/* ------------------------------------------------------------------- gan */

/* Trains the conditional generator against the dataset using embeddings from
 * `enc`; writes checkpoints, sample sheets, and the training CSV under
 * out_dir. config_json uses the "gan" section schema ("{}" for defaults). */
e2i_status e2i_gan_train(const e2i_dataset* ds, const e2i_encoder* enc,
                         const char* config_json, const char* out_dir, e2i_gan** out);

e2i_status e2i_gan_load(const char* ckpt_dir, e2i_gan** out);
e2i_status e2i_gan_save(const e2i_gan* gan, const char* ckpt_dir);

/* Generates `count` images conditioned on embeddings [count, cond_dim];
 * latents are drawn from `seed`. Writes [count, 3, H, W] floats in [-1, 1]
 * into `out` (caller-allocated). */
e2i_status e2i_gan_generate(const e2i_gan* gan, const float* cond, int count,
                            int cond_dim, uint64_t seed, float* out);

e2i_status e2i_gan_image_size(const e2i_gan* gan, int* size);
e2i_status e2i_gan_cond_dim(const e2i_gan* gan, int* dim);

void e2i_gan_free(e2i_gan* gan);

/* ------------------------------------------------------------ evaluation */

/* Full evaluation pass: trains the surrogate classifier on the dataset,
 * generates per-class samples conditioned on held-out EEG, and returns the
 * report as a JSON string {is_mean, is_std, kmeans_acc, class_consistency,
 * diversity, classifier_acc}. Also writes report.json, embeddings_2d.csv,
 * per_class_is.csv, and a sample grid under out_dir when it is non-NULL. */
e2i_status e2i_evaluate(const e2i_dataset* ds, const e2i_encoder* enc, const e2i_gan* gan,
                        const char* config_json, const char* out_dir, uint64_t seed,
                        char** report_json);

/* PNG grid of images laid out row-major, [count, 3, size, size] in [-1, 1]. */
e2i_status e2i_write_image_grid(const char* path, const float* images, int count,
                                int size, int rows, int cols);

/* Sample sheet conditioned on held-out EEG: one grid row per class,
 * `per_class` columns. */
e2i_status e2i_generate_sheet(const e2i_dataset* ds, const e2i_encoder* enc,
                              const e2i_gan* gan, int per_class, uint64_t seed,
                              const char* png_path);

#ifdef __cplusplus
}
#endif

#endif
