#ifndef CPRE_H
#define CPRE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum CpreStatus {
  CPRE_STATUS_OK = 0,
  CPRE_STATUS_NULL_POINTER = 1,
  /**
   * A string argument is not valid UTF-8.
   */
  CPRE_STATUS_INVALID_UTF8 = 2,
  /**
   * A distribution spec, site, document or parameter was rejected.
   */
  CPRE_STATUS_INVALID_ARGUMENT = 3,
  /**
   * A site or time lies outside the object's window.
   */
  CPRE_STATUS_OUT_OF_WINDOW = 4,
  /**
   * The route geometry cannot be laid out.
   */
  CPRE_STATUS_GEOMETRY = 5,
  CPRE_STATUS_WINDOW_TOO_LARGE = 6,
  CPRE_STATUS_BUFFER_TOO_SMALL = 7,
  CPRE_STATUS_IO = 8,
  CPRE_STATUS_PANIC = 9,
} CpreStatus;

/**
 * Opaque edge-rate environment.
 */
typedef struct CpreEnv CpreEnv;

/**
 * Opaque graphical representation on a finite space-time window.
 */
typedef struct CpreRep CpreRep;

/**
 * Opaque event log of one run.
 */
typedef struct CpreTrajectory CpreTrajectory;

/**
 * A lattice site `re + im·i` with `im >= 0`.
 */
typedef struct CpreSite {
  int64_t re;
  int64_t im;
} CpreSite;

/**
 * A Monte Carlo estimate with its 95% Wilson interval.
 */
typedef struct CpreEstimate {
  double point;
  double lo;
  double hi;
  uint64_t trials;
} CpreEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, static and NUL-terminated.
 */
const char *cpre_version(void);

/**
 * Copies the calling thread's last error message into `buf`.
 */
enum CpreStatus cpre_last_error(char *buf, uintptr_t cap, uintptr_t *out_len);

/**
 * Environment from a spec such as `point(2.0)` or `zero_or(3.0,0.5)`.
 */
enum CpreStatus cpre_env_new(const char *spec, uint64_t seed, struct CpreEnv **out);

/**
 * Environment from a document written by [`cpre_env_export`].
 */
enum CpreStatus cpre_env_import(const char *doc, struct CpreEnv **out);

/**
 * Text export of every edge inside the rectangle `x0,y0 .. x1,y1`.
 */
enum CpreStatus cpre_env_export(const struct CpreEnv *env,
                                int64_t x0,
                                int64_t y0,
                                int64_t x1,
                                int64_t y1,
                                char *buf,
                                uintptr_t cap,
                                uintptr_t *out_len);

/**
 * Rate of the edge between two neighbouring sites.
 */
enum CpreStatus cpre_env_rate(const struct CpreEnv *env,
                              struct CpreSite x,
                              struct CpreSite y,
                              double *out);

void cpre_env_free(struct CpreEnv *env);

/**
 * Samples death marks and arrows on the rectangle up to `horizon`. Equal
 * `(env, rectangle, horizon, seed)` give equal reps.
 */
enum CpreStatus cpre_rep_sample(const struct CpreEnv *env,
                                int64_t x0,
                                int64_t y0,
                                int64_t x1,
                                int64_t y1,
                                double horizon,
                                uint64_t seed,
                                struct CpreRep **out);

/**
 * Number of marks (deaths and arrows) in the rep.
 */
enum CpreStatus cpre_rep_mark_count(const struct CpreRep *rep, uintptr_t *out);

void cpre_rep_free(struct CpreRep *rep);

/**
 * Runs the process from `initial` (at time 0) up to `until`.
 */
enum CpreStatus cpre_evolve(const struct CpreRep *rep,
                            const struct CpreSite *initial,
                            uintptr_t n,
                            double until,
                            struct CpreTrajectory **out);

/**
 * The infected set at time `t`, sorted; `*out_len` gets its size.
 */
enum CpreStatus cpre_trajectory_sites_at(const struct CpreTrajectory *traj,
                                         double t,
                                         struct CpreSite *buf,
                                         uintptr_t cap,
                                         uintptr_t *out_len);

/**
 * Number of recorded infections and recoveries.
 */
enum CpreStatus cpre_trajectory_event_count(const struct CpreTrajectory *traj, uintptr_t *out);

void cpre_trajectory_free(struct CpreTrajectory *traj);

/**
 * `P(ξ_T ≠ ∅)` from `initial`. With `annealed` false the environment is
 * `env`; otherwise every trial draws its own from `env`'s distribution.
 * The region is sized automatically around `initial`.
 */
enum CpreStatus cpre_survival(const struct CpreEnv *env,
                              bool annealed,
                              const struct CpreSite *initial,
                              uintptr_t n,
                              double horizon,
                              uint64_t trials,
                              uint64_t seed,
                              uintptr_t threads,
                              struct CpreEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPRE_H */
