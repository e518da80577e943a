#ifndef PSEUDOLIN_H
#define PSEUDOLIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_NULL_POINTER = 1,
  PL_STATUS_INVALID_ARGUMENT = 2,
  PL_STATUS_UNKNOWN_ENTRY = 3,
  PL_STATUS_INVALID_PARAM = 4,
  PL_STATUS_NUMERIC = 5,
  PL_STATUS_NOT_HOMOGENEOUS = 6,
  PL_STATUS_MISSING_BRACKET = 7,
  PL_STATUS_MISSING_ENVELOPES = 8,
  PL_STATUS_CONFIG = 9,
  PL_STATUS_IO = 10,
  PL_STATUS_PANIC = 11,
} PlStatus;

typedef enum PlRunStatus {
  PL_RUN_STATUS_COMPLETED = 0,
  PL_RUN_STATUS_BLEW_UP = 1,
  PL_RUN_STATUS_TOLERANCE_FAILURE = 2,
} PlRunStatus;

typedef enum PlVerdict {
  PL_VERDICT_CERTIFIED = 0,
  PL_VERDICT_HYPOTHESIS_FALSIFIED = 1,
  PL_VERDICT_BOUND_VIOLATED = 2,
  PL_VERDICT_BLEW_UP = 3,
  PL_VERDICT_INCONCLUSIVE = 4,
} PlVerdict;

typedef struct PlCertificate PlCertificate;

// A resolved system with its default envelopes and initial values.
typedef struct PlSystem PlSystem;

typedef struct PlTrajectory PlTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread. Valid until the next
// failing call on the same thread; never null.
const char *pl_last_error(void);

// Library version as a static NUL-terminated string.
const char *pl_version(void);

size_t pl_corpus_count(void);

// Static name of corpus entry `i`, or null when out of range.
const char *pl_corpus_name(size_t i);

// Builds a corpus system with `n` parameter overrides.
//
// # Safety
// `name` must be a NUL-terminated string. When `n > 0`, `param_names` and
// `values` must point to `n` readable elements. `out` must be writable.
enum PlStatus pl_system_from_corpus(const char *name,
                                    const char *const *param_names,
                                    const double *values,
                                    size_t n,
                                    struct PlSystem **out);

// Builds a system from INI text with `[system]` and optional `[envelopes]`.
//
// # Safety
// `text` must be a NUL-terminated string and `out` writable.
enum PlStatus pl_system_from_config(const char *text, struct PlSystem **out);

// # Safety
// `sys` must be null or a handle from a `pl_system_*` constructor, freed once.
void pl_system_free(struct PlSystem *sys);

// Initial time and default initial values of a system.
//
// # Safety
// `sys` must be a live handle; the output pointers must be writable.
enum PlStatus pl_system_defaults(const struct PlSystem *sys,
                                 double *t0,
                                 double *phi0,
                                 double *psi0);

// Integrates on `[t0, t_end]`. Non-positive tolerances select defaults.
//
// # Safety
// `sys` must be a live handle and `out` writable.
enum PlStatus pl_integrate(const struct PlSystem *sys,
                           double phi0,
                           double psi0,
                           double t_end,
                           double rtol,
                           double atol,
                           struct PlTrajectory **out);

// # Safety
// `traj` must be null or a handle from [`pl_integrate`], freed once.
void pl_trajectory_free(struct PlTrajectory *traj);

// Number of nodes, or 0 for a null handle.
//
// # Safety
// `traj` must be null or a live handle.
size_t pl_trajectory_len(const struct PlTrajectory *traj);

// Run status; `t_stop` receives the final time, the escape estimate or the
// failure time.
//
// # Safety
// `traj` must be a live handle; `status` and `t_stop` writable.
enum PlStatus pl_trajectory_status(const struct PlTrajectory *traj,
                                   enum PlRunStatus *status,
                                   double *t_stop);

// Copies up to `cap` nodes into the three arrays; returns the count copied.
//
// # Safety
// `traj` must be a live handle and each array must hold `cap` elements.
size_t pl_trajectory_copy(const struct PlTrajectory *traj,
                          double *t,
                          double *phi,
                          double *psi,
                          size_t cap);

// Envelope criterion with the default sampling plan and `seed`.
//
// # Safety
// `sys` must be a live handle and `out` writable.
enum PlStatus pl_certify_t31(const struct PlSystem *sys,
                             double phi0,
                             double psi0,
                             double t_end,
                             uint64_t seed,
                             struct PlCertificate **out);

// Bound-curve criterion with the default sampling plan and `seed`.
//
// # Safety
// `sys` must be a live handle and `out` writable.
enum PlStatus pl_certify_t32(const struct PlSystem *sys,
                             double c1,
                             double c2,
                             double eps,
                             double t_end,
                             uint64_t seed,
                             struct PlCertificate **out);

// # Safety
// `cert` must be null or a handle from a `pl_certify_*` call, freed once.
void pl_certificate_free(struct PlCertificate *cert);

// # Safety
// `cert` must be a live handle and `verdict` writable.
enum PlStatus pl_certificate_verdict(const struct PlCertificate *cert, enum PlVerdict *verdict);

// `key=value` report as a new string; release with [`pl_string_free`].
// Returns null for a null handle.
//
// # Safety
// `cert` must be null or a live handle.
char *pl_certificate_kv(const struct PlCertificate *cert);

// # Safety
// `s` must be null or a string returned by this library, freed once.
void pl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSEUDOLIN_H */
