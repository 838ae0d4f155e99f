#ifndef GEOREDUCE_H
#define GEOREDUCE_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum GrStatus {
  GR_STATUS_OK = 0,
  GR_STATUS_NULL_POINTER = 1,
  GR_STATUS_INVALID_ARGUMENT = 2,
  GR_STATUS_DOMAIN = 3,
  GR_STATUS_IO = 4,
  GR_STATUS_CONFIG = 5,
  GR_STATUS_PARSE = 6,
  GR_STATUS_PANIC = 7,
} GrStatus;

/**
 * A fitted gradient boosted regressor.
 */
typedef struct GrGbModel GrGbModel;

/**
 * A generated gene library with its OIP oracle.
 */
typedef struct GrOilfield GrOilfield;

/**
 * Outcome of a semi-supervised reduction.
 */
typedef struct GrReport GrReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or null. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *gr_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void gr_string_free(char *s);

/**
 * Model id of an allele triple, each allele in `0..24`.
 *
 * # Safety
 * `out_id` must be a valid pointer.
 */
enum GrStatus gr_alleles_to_id(uint32_t sw, uint32_t ntg, uint32_t phi, uint32_t *out_id);

/**
 * Allele triple of a model id in `0..13824`.
 *
 * # Safety
 * The three output pointers must be valid.
 */
enum GrStatus gr_id_to_alleles(uint32_t id, uint32_t *out_sw, uint32_t *out_ntg, uint32_t *out_phi);

/**
 * Pair-counting Rand index of two labelings of length `n`. Negative ids
 * are noise.
 *
 * # Safety
 * `a` and `b` must point to `n` readable values; `out` must be valid.
 */
enum GrStatus gr_rand_index(const int64_t *a, const int64_t *b, size_t n, double *out);

/**
 * Synthetic oilfield with default settings and the given seed.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GrStatus gr_oilfield_new(uint64_t seed, struct GrOilfield **out);

/**
 * Synthetic oilfield from a JSON object of oilfield settings.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be valid.
 */
enum GrStatus gr_oilfield_from_config_json(const char *json, struct GrOilfield **out);

/**
 * # Safety
 * `h` must come from `gr_oilfield_new`/`gr_oilfield_from_config_json` and
 * not have been freed. Null is ignored.
 */
void gr_oilfield_free(struct GrOilfield *h);

/**
 * Copies the 132-value genome of model `id` into `out`.
 *
 * # Safety
 * `h` must be a live handle; `out` must hold `len` writable values.
 */
enum GrStatus gr_oilfield_genome(const struct GrOilfield *h, uint32_t id, double *out, size_t len);

/**
 * True OIP of model `id`.
 *
 * # Safety
 * `h` must be a live handle; `out` must be valid.
 */
enum GrStatus gr_oilfield_oip(const struct GrOilfield *h, uint32_t id, double *out);

/**
 * Trains on a row-major `n_rows × n_cols` matrix. `params_json` may be
 * null for defaults.
 *
 * # Safety
 * `x` must hold `n_rows·n_cols` values, `y` `n_rows` values; `params_json`
 * is null or nul-terminated; `out` must be valid.
 */
enum GrStatus gr_gb_train(const double *x,
                          size_t n_rows,
                          size_t n_cols,
                          const double *y,
                          const char *params_json,
                          struct GrGbModel **out);

/**
 * Reloads a model saved with [`gr_gb_to_text`].
 *
 * # Safety
 * `text` must be nul-terminated; `out` must be valid.
 */
enum GrStatus gr_gb_from_text(const char *text, struct GrGbModel **out);

/**
 * Text serialization; release with [`gr_string_free`].
 *
 * # Safety
 * `m` must be a live handle; `out` must be valid.
 */
enum GrStatus gr_gb_to_text(const struct GrGbModel *m, char **out);

/**
 * Predicts one row of `n_cols` features.
 *
 * # Safety
 * `m` must be a live handle; `x` must hold `n_cols` values; `out` valid.
 */
enum GrStatus gr_gb_predict(const struct GrGbModel *m, const double *x, size_t n_cols, double *out);

/**
 * # Safety
 * `m` must come from this library and not have been freed. Null is ignored.
 */
void gr_gb_free(struct GrGbModel *m);

/**
 * Runs the full reduction. `config_json` is a JSON reduction config, or
 * null for defaults.
 *
 * # Safety
 * `config_json` is null or nul-terminated; `out` must be valid.
 */
enum GrStatus gr_reduce(const char *config_json, struct GrReport **out);

/**
 * # Safety
 * `r` must be a live report handle.
 */
enum GrStatus gr_report_n_representatives(const struct GrReport *r, size_t *out);

/**
 * Representative `index` in cluster order.
 *
 * # Safety
 * `r` must be a live report handle; output pointers must be valid.
 */
enum GrStatus gr_report_representative(const struct GrReport *r,
                                       size_t index,
                                       uint32_t *out_id,
                                       uint32_t *out_cluster,
                                       double *out_predicted_oip,
                                       double *out_true_oip);

/**
 * Number of models evaluated with the oracle for training.
 *
 * # Safety
 * `r` must be a live report handle; `out` must be valid.
 */
enum GrStatus gr_report_n_samples(const struct GrReport *r, size_t *out);

/**
 * Rand agreement with the histogram gold standard, for the predicted-OIP
 * map and for a Euclidean map.
 *
 * # Safety
 * `r` must be a live report handle; output pointers must be valid.
 */
enum GrStatus gr_report_rand_vs_gold(const struct GrReport *r,
                                     double *out_semi,
                                     double *out_euclidean);

/**
 * Size-weighted mean within-cluster true-OIP range, for the predicted-OIP
 * map and for a Euclidean map.
 *
 * # Safety
 * `r` must be a live report handle; output pointers must be valid.
 */
enum GrStatus gr_report_true_spread(const struct GrReport *r,
                                    double *out_semi,
                                    double *out_euclidean);

/**
 * Cluster of every model, noise as −1. `len` must equal the model count.
 *
 * # Safety
 * `r` must be a live report handle; `out` must hold `len` values.
 */
enum GrStatus gr_report_clusters(const struct GrReport *r, int64_t *out, size_t len);

/**
 * The report as JSON; release with [`gr_string_free`].
 *
 * # Safety
 * `r` must be a live report handle; `out` must be valid.
 */
enum GrStatus gr_report_to_json(const struct GrReport *r, char **out);

/**
 * # Safety
 * `r` must come from [`gr_reduce`] and not have been freed. Null is ignored.
 */
void gr_report_free(struct GrReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOREDUCE_H */
