#ifndef PHENOPRIO_H
#define PHENOPRIO_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  PP_STATUS_OK = 0,
  PP_STATUS_NULL_POINTER = 1,
  PP_STATUS_INVALID_UTF8 = 2,
  PP_STATUS_CONFIG = 3,
  PP_STATUS_DATA = 4,
  PP_STATUS_BACKEND = 5,
  PP_STATUS_PANIC = 6,
} PpStatus;

typedef struct PpIndex PpIndex;

typedef struct PpModel PpModel;

typedef struct PpOntology PpOntology;

typedef struct PpStats PpStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call on the same thread.
 */
const char *pp_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *pp_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void pp_string_free(char *s);

/**
 * Loads an OBO or JSON ontology file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
PpStatus pp_ontology_load(const char *path, PpOntology **out);

/**
 * Parses OBO text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
PpStatus pp_ontology_parse_obo(const char *text, PpOntology **out);

/**
 * # Safety
 * `o` must be NULL or a handle from `pp_ontology_load`/`pp_ontology_parse_obo`.
 */
void pp_ontology_free(PpOntology *o);

/**
 * Number of non-obsolete terms.
 *
 * # Safety
 * `o` must be a valid handle and `out` a valid pointer.
 */
PpStatus pp_ontology_live_count(const PpOntology *o, uintptr_t *out);

/**
 * Primary name of a term; free the result with `pp_string_free`.
 *
 * # Safety
 * `o` must be a valid handle, `id` a NUL-terminated string and `out` a
 * valid pointer.
 */
PpStatus pp_ontology_term_name(const PpOntology *o, const char *id, char **out);

/**
 * Information content from disease (`term\tdisease\tsource`) and optional
 * gene (`term\tgene`) annotation text.
 *
 * # Safety
 * `o` must be a valid handle, `diseases` a NUL-terminated string, `genes`
 * NULL or a NUL-terminated string, and `out` a valid pointer.
 */
PpStatus pp_stats_new(const PpOntology *o, const char *diseases, const char *genes, PpStats **out);

/**
 * # Safety
 * `s` must be NULL or a handle from `pp_stats_new`.
 */
void pp_stats_free(PpStats *s);

/**
 * # Safety
 * `s` must be a valid handle, `id` a NUL-terminated string and `out` a
 * valid pointer.
 */
PpStatus pp_stats_ic(const PpStats *s, const char *id, double *out);

/**
 * Lin similarity of two terms.
 *
 * # Safety
 * Handles must be valid and built from the same ontology; `a`, `b` must be
 * NUL-terminated strings and `out` a valid pointer.
 */
PpStatus pp_lin_similarity(const PpOntology *o,
                           const PpStats *s,
                           const char *a,
                           const char *b,
                           double *out);

/**
 * Best-match-average Lin similarity of two term sets.
 *
 * # Safety
 * Handles must be valid; `a` and `b` must point to `na` and `nb`
 * NUL-terminated strings; `out` must be a valid pointer.
 */
PpStatus pp_set_similarity(const PpOntology *o,
                           const PpStats *s,
                           const char *const *a,
                           uintptr_t na,
                           const char *const *b,
                           uintptr_t nb,
                           double *out);

/**
 * Embedding index over every live term name and synonym.
 *
 * # Safety
 * `o` must be a valid handle and `out` a valid pointer.
 */
PpStatus pp_index_build(const PpOntology *o, PpIndex **out);

/**
 * # Safety
 * `i` must be NULL or a handle from `pp_index_build`.
 */
void pp_index_free(PpIndex *i);

/**
 * Maps a mention to a term. `*term_out` receives the term id (free with
 * `pp_string_free`) or NULL when the best cosine is below `threshold`;
 * `*score_out` receives that cosine.
 *
 * # Safety
 * Handles must be valid and built from the same ontology; `mention` must
 * be a NUL-terminated string; out pointers must be valid.
 */
PpStatus pp_standardize(const PpIndex *i,
                        const PpOntology *o,
                        const char *mention,
                        double threshold,
                        char **term_out,
                        double *score_out);

/**
 * Loads a model written by the `train` subcommand.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
PpStatus pp_model_load(const char *path, PpModel **out);

/**
 * # Safety
 * `m` must be NULL or a handle from `pp_model_load`.
 */
void pp_model_free(PpModel *m);

/**
 * Length of the feature vector the model expects.
 *
 * # Safety
 * `m` must be a valid handle and `out` a valid pointer.
 */
PpStatus pp_model_feature_count(const PpModel *m, uintptr_t *out);

/**
 * Scores one raw feature vector.
 *
 * # Safety
 * `m` must be a valid handle, `features` must point to `n` doubles and
 * `out` must be a valid pointer.
 */
PpStatus pp_model_score(const PpModel *m, const double *features, uintptr_t n, double *out);

/**
 * Top-k precision, recall and F1 of a ranked list against gold terms.
 *
 * # Safety
 * `ranked` and `gold` must point to `n_ranked` and `n_gold`
 * NUL-terminated strings; out pointers must be valid.
 */
PpStatus pp_topk_prf(const char *const *ranked,
                     uintptr_t n_ranked,
                     const char *const *gold,
                     uintptr_t n_gold,
                     uintptr_t k,
                     double *precision,
                     double *recall,
                     double *f1);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHENOPRIO_H */
