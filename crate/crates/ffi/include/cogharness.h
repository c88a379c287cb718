#ifndef COGHARNESS_H
#define COGHARNESS_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum CghStatus {
  CGH_STATUS_OK = 0,
  CGH_STATUS_NULL_ARGUMENT = 1,
  CGH_STATUS_INVALID_UTF8 = 2,
  CGH_STATUS_INVALID_ARGUMENT = 3,
  CGH_STATUS_INVALID_CHOICE = 4,
  CGH_STATUS_SESSION_COMPLETE = 5,
  CGH_STATUS_MODEL = 6,
  CGH_STATUS_STATS = 7,
  CGH_STATUS_PANIC = 8,
} CghStatus;

typedef enum CghTask {
  CGH_TASK_IGT = 0,
  CGH_TASK_CGT = 1,
  CGH_TASK_WCST = 2,
} CghTask;

/**
 * Opaque handle to one running session.
 */
typedef struct CghSession CghSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last failure on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *cgh_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *cgh_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void cgh_string_free(char *s);

/**
 * Starts a session with the default configuration for `task`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CghStatus cgh_session_new(enum CghTask task, uint64_t seed, struct CghSession **out);

/**
 * Starts a session from a JSON task configuration.
 *
 * # Safety
 * `config_json` must be a nul-terminated string and `out` a valid pointer.
 */
enum CghStatus cgh_session_new_json(const char *config_json,
                                    uint64_t seed,
                                    struct CghSession **out);

/**
 * # Safety
 * `s` must be null or a handle from `cgh_session_new*`, not yet freed.
 */
void cgh_session_free(struct CghSession *s);

/**
 * Rounds completed so far.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum CghStatus cgh_session_rounds_played(const struct CghSession *s, uint32_t *out);

/**
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum CghStatus cgh_session_n_rounds(const struct CghSession *s, uint32_t *out);

/**
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum CghStatus cgh_session_is_done(const struct CghSession *s, bool *out);

/**
 * Running points (IGT, CGT) or correct matches (WCST).
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum CghStatus cgh_session_cumulative(const struct CghSession *s, int64_t *out);

/**
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum CghStatus cgh_session_final_score(const struct CghSession *s, int64_t *out);

/**
 * Plays option `index` (0 = A) in an IGT or WCST session.
 * `out_cumulative` may be null.
 *
 * # Safety
 * `s` must be a live handle; `out_cumulative` null or valid.
 */
enum CghStatus cgh_session_choose(struct CghSession *s, uint32_t index, int64_t *out_cumulative);

/**
 * Places a CGT bet of `percent` on red (`red == true`) or blue.
 * `out_cumulative` may be null.
 *
 * # Safety
 * `s` must be a live handle; `out_cumulative` null or valid.
 */
enum CghStatus cgh_session_bet(struct CghSession *s,
                               bool red,
                               uint8_t percent,
                               int64_t *out_cumulative);

/**
 * Applies a JSON choice and returns the trial record as JSON.
 *
 * # Safety
 * `s` must be a live handle, `choice_json` nul-terminated, `out_trial_json` valid.
 */
enum CghStatus cgh_session_step_json(struct CghSession *s,
                                     const char *choice_json,
                                     char **out_trial_json);

/**
 * Current observation as JSON.
 *
 * # Safety
 * `s` must be a live handle and `out_json` valid.
 */
enum CghStatus cgh_session_observation_json(const struct CghSession *s, char **out_json);

/**
 * Trials so far as JSON Lines.
 *
 * # Safety
 * `s` must be a live handle and `out_jsonl` valid.
 */
enum CghStatus cgh_session_history_jsonl(const struct CghSession *s, char **out_jsonl);

/**
 * Log-likelihood of a JSON Lines trial log under `model`
 * (`pvl_decay`, `cumulative` or `slm`) at the natural-scale `params`.
 *
 * # Safety
 * `model` and `trials_jsonl` nul-terminated; `params` holds `n_params` values; `out` valid.
 */
enum CghStatus cgh_loglik(const char *model,
                          const double *params,
                          uintptr_t n_params,
                          const char *trials_jsonl,
                          double *out);

/**
 * Two-sided Mann-Whitney U test of `x` against `y`.
 *
 * # Safety
 * `x` and `y` hold `nx` and `ny` values; `out_u` and `out_p` valid.
 */
enum CghStatus cgh_mann_whitney(const double *x,
                                uintptr_t nx,
                                const double *y,
                                uintptr_t ny,
                                double *out_u,
                                double *out_p);

/**
 * Split R-hat of `n_chains` chains of `n_draws` draws each, stored chain after chain.
 *
 * # Safety
 * `draws` holds `n_chains * n_draws` values; `out` valid.
 */
enum CghStatus cgh_rhat(const double *draws, uintptr_t n_chains, uintptr_t n_draws, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COGHARNESS_H */
