#ifndef POLLFORGE_H
#define POLLFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PfStatus {
  PF_STATUS_OK = 0,
  PF_STATUS_NULL_POINTER = 1,
  PF_STATUS_INVALID_UTF8 = 2,
  PF_STATUS_INVALID_ARGUMENT = 3,
  PF_STATUS_IO = 4,
  PF_STATUS_MODEL = 5,
  PF_STATUS_PANIC = 6,
} PfStatus;

/**
 * Which single metric [`pf_metric`] computes.
 */
typedef enum PfMetric {
  PF_METRIC_ROUGE_N = 0,
  PF_METRIC_ROUGE_L = 1,
  PF_METRIC_BLEU_N = 2,
} PfMetric;

/**
 * A trained model with its tokenizer and run settings.
 */
typedef struct PfModel PfModel;

/**
 * A parsed poll.
 */
typedef struct PfPoll PfPoll;

/**
 * ROUGE-1, ROUGE-L, BLEU-1 and BLEU-3 on a 0-100 scale.
 */
typedef struct PfScores {
  double rouge1;
  double rouge_l;
  double bleu1;
  double bleu3;
} PfScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty if none. Owned by the library.
 */
const char *pf_last_error(void);

/**
 * Library version as a static string.
 */
const char *pf_version(void);

/**
 * All four scores of `candidate` against `reference`.
 *
 * # Safety
 * `candidate` and `reference` must be NUL-terminated strings; `out` must be writable.
 */
enum PfStatus pf_score(const char *candidate, const char *reference, struct PfScores *out);

/**
 * One metric; `n` is the n-gram order for ROUGE-N and BLEU-N and ignored for ROUGE-L.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum PfStatus pf_metric(enum PfMetric metric,
                        const char *candidate,
                        const char *reference,
                        size_t n,
                        double *out);

/**
 * Splits raw generated text into question and answers using the default control tokens.
 *
 * # Safety
 * `raw` must be NUL-terminated; `out` must be writable. Free the result with [`pf_poll_free`].
 */
enum PfStatus pf_parse_generation(const char *raw, bool dedupe, struct PfPoll **out);

/**
 * # Safety
 * `poll` must come from this library or be null.
 */
const char *pf_poll_question(const struct PfPoll *poll);

/**
 * # Safety
 * `poll` must come from this library or be null.
 */
const char *pf_poll_raw(const struct PfPoll *poll);

/**
 * # Safety
 * `poll` must come from this library or be null.
 */
size_t pf_poll_answer_count(const struct PfPoll *poll);

/**
 * Null when `index` is out of range.
 *
 * # Safety
 * `poll` must come from this library or be null.
 */
const char *pf_poll_answer(const struct PfPoll *poll, size_t index);

/**
 * # Safety
 * `poll` must come from this library or be null.
 */
bool pf_poll_parse_ok(const struct PfPoll *poll);

/**
 * # Safety
 * `poll` must come from this library (or be null) and not be used afterwards.
 */
void pf_poll_free(struct PfPoll *poll);

/**
 * Loads a checkpoint file or a run directory written by `pollforge train`.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable. Free with [`pf_model_free`].
 */
enum PfStatus pf_model_load(const char *path, struct PfModel **out);

/**
 * Generates a poll for a post and its comments with the main-task prompt.
 * `beam_size` 0 keeps the checkpoint's setting.
 *
 * # Safety
 * `model` must come from [`pf_model_load`]; `post` must be NUL-terminated;
 * `comments` must point to `n_comments` NUL-terminated strings (may be null
 * when `n_comments` is 0); `out` must be writable.
 */
enum PfStatus pf_model_generate(const struct PfModel *model,
                                const char *post,
                                const char *const *comments,
                                size_t n_comments,
                                size_t beam_size,
                                struct PfPoll **out);

/**
 * # Safety
 * `model` must come from [`pf_model_load`] (or be null) and not be used afterwards.
 */
void pf_model_free(struct PfModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLLFORGE_H */
