#ifndef TEACHKIT_H
#define TEACHKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by all fallible functions.
 */
typedef enum TkStatus {
  TK_OK = 0,
  TK_ERR_NULL = 1,
  TK_ERR_DOMAIN = 2,
  TK_ERR_SINGULAR = 3,
  TK_ERR_DIVERGENCE = 4,
  TK_ERR_UNKNOWN_SESSION = 5,
  TK_ERR_SESSION_COMPLETE = 6,
  TK_ERR_INVALID_POINTS = 7,
  TK_ERR_BUFFER = 8,
  TK_ERR_INTERNAL = 9,
  TK_ERR_PANIC = 10,
} TkStatus;

/**
 * Session group for [`tk_store_create_session`].
 */
typedef enum TkGroup {
  TK_GROUP_ASSIGN = 0,
  TK_GROUP_TARGET = 1,
  TK_GROUP_CONTROL = 2,
} TkGroup;

/**
 * Opaque teaching-session store.
 */
typedef struct TkStore TkStore;

/**
 * Opaque sampled trajectory.
 */
typedef struct TkTrajectory TkTrajectory;

/**
 * Outcome of a committed phase.
 */
typedef struct TkCommitResult {
  uint8_t phase;
  double stiffness;
  double damping;
  double score;
  double rmse;
  double l2;
  bool diverged;
  /**
   * True when this commit finished the session.
   */
  bool done;
} TkCommitResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null.
 *
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *tk_last_error(void);

/**
 * Teaching-quality score (0 to 100) of two via points.
 */
double tk_teaching_score(double q1, double v1, double q2, double v2);

/**
 * Ridge fit from two via points and their actions.
 *
 * # Safety
 * `points` must hold 4 doubles, `actions` 2, and `out_w` room for 2
 * (stiffness, damping).
 */
enum TkStatus tk_ridge_fit(const double *points,
                           const double *actions,
                           double lambda,
                           double *out_w);

/**
 * Variance part of the teaching risk for the canonical pair at `omega`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TkStatus tk_risk_variance(double omega, double sigma, double lambda, double *out);

/**
 * Derivative of [`tk_risk_variance`] with respect to `omega`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TkStatus tk_risk_derivative(double omega, double sigma, double lambda, double *out);

/**
 * Simulates the skill `(stiffness, damping)` on the default pendulum.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle owned by
 * the caller.
 */
enum TkStatus tk_rollout(double stiffness,
                         double damping,
                         double q0,
                         double v0,
                         double duration,
                         struct TkTrajectory **out);

/**
 * Number of states in `traj` (0 for null).
 *
 * # Safety
 * `traj` must be null or a live handle from [`tk_rollout`].
 */
size_t tk_trajectory_len(const struct TkTrajectory *traj);

/**
 * State `index` of `traj` and the torque applied from it.
 *
 * # Safety
 * `traj` must be a live handle; output pointers must be valid.
 */
enum TkStatus tk_trajectory_get(const struct TkTrajectory *traj,
                                size_t index,
                                double *angle,
                                double *velocity,
                                double *torque);

/**
 * Releases a trajectory. Null is ignored.
 *
 * # Safety
 * `traj` must be null or a handle not yet freed.
 */
void tk_trajectory_free(struct TkTrajectory *traj);

/**
 * Creates an in-memory session store without an event log.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TkStatus tk_store_new(uint64_t seed, double noise_sigma, struct TkStore **out);

/**
 * Releases a store. Null is ignored.
 *
 * # Safety
 * `store` must be null or a handle not yet freed.
 */
void tk_store_free(struct TkStore *store);

/**
 * Creates a session and copies its NUL-terminated id into `id_buf`.
 *
 * Ids are 32 characters, so `id_len` of 33 always suffices.
 *
 * # Safety
 * `store` must be live; `id_buf` must hold `id_len` bytes.
 */
enum TkStatus tk_store_create_session(const struct TkStore *store,
                                      enum TkGroup group,
                                      char *id_buf,
                                      size_t id_len);

/**
 * Validates via points for the session's current phase without committing.
 *
 * `out_has_score` is set only in guided phases, in which case `out_score`
 * receives the teaching score; otherwise `out_score` is left untouched.
 * Invalid points return `TK_ERR_INVALID_POINTS`.
 *
 * # Safety
 * `store` must be live, `id` a C string, `points` 4 doubles, and both
 * output pointers valid.
 */
enum TkStatus tk_store_preview(const struct TkStore *store,
                               const char *id,
                               const double *points,
                               bool *out_has_score,
                               double *out_score);

/**
 * Commits via points for the session's current phase.
 *
 * # Safety
 * `store` must be live, `id` a C string, `points` 4 doubles, `out` valid.
 */
enum TkStatus tk_store_commit(const struct TkStore *store,
                              const char *id,
                              const double *points,
                              struct TkCommitResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEACHKIT_H */
