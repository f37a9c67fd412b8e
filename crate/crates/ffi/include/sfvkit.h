#ifndef SFVKIT_H
#define SFVKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

#define SFVKIT_OK 0

/*
 A required pointer argument was null.
 */
#define SFVKIT_ERR_NULL_POINTER -1

/*
 A string argument was not valid UTF-8.
 */
#define SFVKIT_ERR_INVALID_UTF8 -2

/*
 An internal panic was caught at the boundary.
 */
#define SFVKIT_ERR_PANIC -3

/*
 A channel selector other than pitch or energy.
 */
#define SFVKIT_ERR_INVALID_ARGUMENT -4

#define SFVKIT_ERR_MALFORMED_HEADER 10

#define SFVKIT_ERR_UNSUPPORTED_ENCODING 11

#define SFVKIT_ERR_EMPTY_SIGNAL 12

#define SFVKIT_ERR_INVALID_CONFIG 13

#define SFVKIT_ERR_SAMPLE_RATE_MISMATCH 14

#define SFVKIT_ERR_NO_VALUES 20

#define SFVKIT_ERR_KIND_MISMATCH 21

#define SFVKIT_ERR_DURATION_MISMATCH 22

#define SFVKIT_ERR_NEGATIVE_DURATION 23

#define SFVKIT_ERR_SCHEMA 30

#define SFVKIT_ERR_SPAN_OVERLAP 31

#define SFVKIT_ERR_DURATION_COUNT_MISMATCH 32

#define SFVKIT_ERR_TOKEN 33

#define SFVKIT_ERR_NEGATIVE_INTERVAL 34

#define SFVKIT_ERR_LENGTH_MISMATCH 40

#define SFVKIT_ERR_INDEX_OUT_OF_RANGE 41

#define SFVKIT_ERR_VOCAB_MISS 42

#define SFVKIT_ERR_MISSING_INPUT 43

#define SFVKIT_ERR_INSUFFICIENT_DATA 50

#define SFVKIT_ERR_EMPTY_SEQUENCE 51

#define SFVKIT_ERR_MISSING_UTTERANCE 52

#define SFVKIT_ERR_EMPTY_SYSTEM 53

#define SFVKIT_ERR_OUT_OF_RANGE 60

#define SFVKIT_ERR_MISSING_TRANSCRIPT 61

#define SFVKIT_ERR_BAD_SPEC 62

#define SFVKIT_ERR_DUPLICATE_ID 63

#define SFVKIT_ERR_IO 70

#define SFVKIT_CHANNEL_PITCH 0

#define SFVKIT_CHANNEL_ENERGY 1

/*
 Frame-level pitch and energy of one utterance.
 */
typedef struct SfvkitFeatures SfvkitFeatures;

/*
 Per-target-phoneme source feature vector.
 */
typedef struct SfvkitSfv SfvkitSfv;

typedef struct SfvkitPitchMoments {
  double sigma;
  double gamma;
  /*
   Non-excess kurtosis, m4 / m2^2.
   */
  double kappa;
} SfvkitPitchMoments;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copy of the last error message on this thread, or null if there is none.
 Free the result with `sfvkit_string_free`.
 */
char *sfvkit_last_error_message(void);

/*
 # Safety
 `s` must be null or a string returned by this library, freed only once.
 */
void sfvkit_string_free(char *s);

/*
 Decode a PCM-16 WAV image, resample to the analysis rate and extract
 pitch and energy. `config_json` may be null for the default analysis
 settings (22050 Hz, hop 256, frame 1024).

 # Safety
 `wav` must point to `len` readable bytes; strings must be nul-terminated;
 `out` must be writable.
 */
int32_t sfvkit_features_from_wav(const uint8_t *wav,
                                 uintptr_t len,
                                 const char *utterance_id,
                                 const char *config_json,
                                 struct SfvkitFeatures **out);

/*
 Load a feature record from its JSON form.

 # Safety
 `json` must be a nul-terminated string; `out` must be writable.
 */
int32_t sfvkit_features_from_json(const char *json, struct SfvkitFeatures **out);

/*
 # Safety
 `h` must be a live handle; `out` must be writable.
 */
int32_t sfvkit_features_to_json(const struct SfvkitFeatures *h, char **out);

/*
 # Safety
 `h` must be a live handle; `out` must be writable.
 */
int32_t sfvkit_features_num_frames(const struct SfvkitFeatures *h, uintptr_t *out);

/*
 Copy one channel (f0 in Hz with 0 for unvoiced frames, or energy) into
 `buf`, which must hold exactly `num_frames` values.

 # Safety
 `h` must be a live handle; `buf` must be writable for `len` values.
 */
int32_t sfvkit_features_copy_channel(const struct SfvkitFeatures *h,
                                     uint32_t channel,
                                     double *buf,
                                     uintptr_t len);

/*
 # Safety
 `h` must be null or a handle from this library, freed only once.
 */
void sfvkit_features_free(struct SfvkitFeatures *h);

/*
 Build an SFV from the source utterance's aggregated prosody (JSON written by
 `sfvkit aggregate`), one pharaoh alignment line, and the target utterance
 record (JSON).

 # Safety
 Strings must be nul-terminated; `out` must be writable.
 */
int32_t sfvkit_sfv_build(const char *source_prosody_json,
                         const char *pharaoh,
                         const char *target_utterance_json,
                         struct SfvkitSfv **out);

/*
 All-zero SFV for the target utterance.

 # Safety
 `target_utterance_json` must be nul-terminated; `out` must be writable.
 */
int32_t sfvkit_sfv_zero(const char *target_utterance_json, struct SfvkitSfv **out);

/*
 Number of target phonemes.

 # Safety
 `h` must be a live handle; `out` must be writable.
 */
int32_t sfvkit_sfv_len(const struct SfvkitSfv *h, uintptr_t *out);

/*
 # Safety
 `h` must be a live handle; `buf` must be writable for `len` values.
 */
int32_t sfvkit_sfv_copy_channel(const struct SfvkitSfv *h,
                                uint32_t channel,
                                double *buf,
                                uintptr_t len);

/*
 # Safety
 `h` must be a live handle; `out` must be writable.
 */
int32_t sfvkit_sfv_to_json(const struct SfvkitSfv *h, char **out);

/*
 # Safety
 `h` must be null or a handle from this library, freed only once.
 */
void sfvkit_sfv_free(struct SfvkitSfv *h);

/*
 DTW distance with local cost |a_i - b_j| and the symmetric step pattern.
 A nonzero `normalize` divides by `len_a + len_b`.

 # Safety
 `a` and `b` must be readable for their lengths; `out` must be writable.
 */
int32_t sfvkit_dtw_distance(const double *a,
                            uintptr_t len_a,
                            const double *b,
                            uintptr_t len_b,
                            int32_t normalize,
                            double *out);

/*
 Mean absolute error between two equally long contours.

 # Safety
 `a` and `b` must be readable for `len` values; `out` must be writable.
 */
int32_t sfvkit_mean_absolute_error(const double *a, const double *b, uintptr_t len, double *out);

/*
 Population sigma, skewness and non-excess kurtosis of pooled voiced f0.

 # Safety
 `values` must be readable for `len` values; `out` must be writable.
 */
int32_t sfvkit_pitch_moments(const double *values, uintptr_t len, struct SfvkitPitchMoments *out);

/*
 `out[i] = predicted[i] + sfv[i]`. `out` may alias `predicted`.

 # Safety
 `predicted` and `sfv` must be readable and `out` writable for `len` values.
 */
int32_t sfvkit_apply_addition(const double *predicted,
                              const double *sfv,
                              uintptr_t len,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SFVKIT_H */
