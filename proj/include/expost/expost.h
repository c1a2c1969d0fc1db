/* Copyright 2026 The Expost Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the expost noise-reduction toolkit.
 *
 * Every fallible call returns an expost_status. On failure the message (and,
 * for configuration errors, the offending field) can be read with
 * expost_last_error() and expost_last_error_field(); both are thread-local
 * and valid until the next expost call on the same thread.
 *
 * Strings returned through char** out-parameters are owned by the caller and
 * must be released with expost_string_free(). Handles are released with their
 * matching *_free function; passing NULL to a free function is a no-op.
 *
 * A handle is not thread-safe; callers serialize calls on one handle.
 * Different handles may be used from different threads.
 */

#ifndef EXPOST_EXPOST_H_
#define EXPOST_EXPOST_H_

#include <stddef.h>
#include <stdint.h>

#if defined(EXPOST_BUILDING_LIBRARY)
#define EXPOST_API __attribute__((visibility("default")))
#else
#define EXPOST_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  EXPOST_OK = 0,
  EXPOST_INVALID_ARGUMENT = 1,   /* bad configuration or domain error */
  EXPOST_OUT_OF_RANGE = 2,       /* unattainable epsilon, budget floor */
  EXPOST_FAILED_PRECONDITION = 3, /* monotonicity, halted session */
  EXPOST_UNIMPLEMENTED = 4,      /* e.g. epsilon targets for skellam */
  EXPOST_NOT_FOUND = 5,          /* missing file */
  EXPOST_INTERNAL = 6,           /* numerical failure */
  EXPOST_UNAVAILABLE = 7         /* cannot bind a port */
} expost_status;

EXPOST_API const char* expost_version(void);
EXPOST_API const char* expost_status_name(expost_status status);
EXPOST_API const char* expost_last_error(void);
/* Empty string when the last error named no field. */
EXPOST_API const char* expost_last_error_field(void);
EXPOST_API void expost_string_free(char* s);

/* ---- Privacy boundaries ---- */

typedef struct expost_boundary expost_boundary;

EXPOST_API expost_status expost_boundary_linear(double a, double b,
                                                double delta,
                                                double sensitivity,
                                                expost_boundary** out);
EXPOST_API expost_status expost_boundary_mixture(double rho, double delta,
                                                 double sensitivity,
                                                 expost_boundary** out);
/* kind is "linear" or "mixture". */
EXPOST_API expost_status expost_boundary_tune(const char* kind,
                                              double sensitivity, double delta,
                                              double target_eps,
                                              expost_boundary** out);
EXPOST_API expost_status expost_boundary_eval(const expost_boundary* b,
                                              double t, double* psi);
EXPOST_API expost_status expost_boundary_invert(const expost_boundary* b,
                                                double eps, double* t);
EXPOST_API double expost_boundary_floor(const expost_boundary* b);
EXPOST_API expost_status expost_boundary_json(const expost_boundary* b,
                                              char** json);
EXPOST_API void expost_boundary_free(expost_boundary* b);

/* ---- Mechanism sessions ----
 *
 * Noise is drawn from the (seed, stream) generator. Step functions write dim
 * values to iterate (which may be NULL) and the ex-post epsilon to eps (NaN
 * for skellam, which issues no receipts).
 */

typedef struct expost_session expost_session;

/* The l2 sensitivity is taken from the boundary. */
EXPOST_API expost_status expost_session_open_brownian(
    const double* center, size_t dim, const expost_boundary* boundary,
    uint64_t seed, uint64_t stream, expost_session** out);
EXPOST_API expost_status expost_session_open_laplace(
    const double* center, size_t dim, double l1_sensitivity, double eta,
    uint64_t seed, uint64_t stream, expost_session** out);
EXPOST_API expost_status expost_session_open_skellam(
    const double* center, size_t dim, double rate_plus, double rate_minus,
    uint64_t seed, uint64_t stream, expost_session** out);
EXPOST_API size_t expost_session_dim(const expost_session* s);
EXPOST_API expost_status expost_session_step_time(expost_session* s, double t,
                                                  double* iterate,
                                                  double* eps);
EXPOST_API expost_status expost_session_step_eps(expost_session* s,
                                                 double target_eps,
                                                 double* iterate, double* eps);
/* Finalizes the session; writes the stop record as JSON. Idempotent. */
EXPOST_API expost_status expost_session_stop(expost_session* s, char** json);
EXPOST_API expost_status expost_session_transcript(const expost_session* s,
                                                   char** json);
EXPOST_API void expost_session_free(expost_session* s);

/* ---- Reduced above-threshold ---- */

typedef struct expost_rat expost_rat;

EXPOST_API expost_status expost_rat_open(double eps_max, double tau,
                                         double delta_u, uint64_t seed,
                                         uint64_t stream, expost_rat** out);
/* bit receives 1 when the check passes (the session then halts). */
EXPOST_API expost_status expost_rat_step(expost_rat* r, double utility,
                                         double eps, int* bit);
/* alg_eps + eps_N; the session must have halted. */
EXPOST_API expost_status expost_rat_ex_post_bound(expost_rat* r,
                                                  double alg_eps,
                                                  double* total);
EXPOST_API expost_status expost_rat_transcript(const expost_rat* r,
                                               int include_noise, char** json);
EXPOST_API void expost_rat_free(expost_rat* r);

/* ---- Batch commands ----
 *
 * config_json is an experiment config object; NULL or "" uses the defaults.
 * Outputs are CSV text with a metadata comment line.
 */

/* Validates a config and writes its canonical JSON form. */
EXPOST_API expost_status expost_config_canonical(const char* config_json,
                                                 char** json);
EXPOST_API expost_status expost_run_curves(const char* config_json,
                                           char** csv);
EXPOST_API expost_status expost_run_distributions(const char* config_json,
                                                  char** csv);
/* Runs the statistical validation suite. trial_scale in (0, 1] shrinks the
 * Monte Carlo sizes. passed receives 1 when every check passes. */
EXPOST_API expost_status expost_run_validate(uint64_t seed, double trial_scale,
                                             char** json, int* passed);
/* JSON report of the tuned boundary and its required noise time. */
EXPOST_API expost_status expost_tune(const char* kind, double sensitivity,
                                     double delta, double target_eps,
                                     char** json);
/* task is "logistic" or "ridge". */
EXPOST_API expost_status expost_synth_csv(const char* task, size_t n,
                                          size_t d, uint64_t seed, char** csv);
/* l2 and l1 sensitivities of the released statistic for an ERM task. */
EXPOST_API expost_status expost_task_sensitivity(const char* task, size_t n,
                                                 size_t d, double reg_lambda,
                                                 double* l2, double* l1);
/* Loads and checks a CSV dataset; writes its shape. */
EXPOST_API expost_status expost_load_csv(const char* path, const char* task,
                                         size_t* n, size_t* d);

/* ---- HTTP service ---- */

typedef struct expost_server expost_server;

/* host NULL means loopback; port 0 picks a free port; static_dir may be
 * NULL. Serving starts on a background thread. */
EXPOST_API expost_status expost_server_start(const char* host, int port,
                                             const char* static_dir,
                                             expost_server** out);
EXPOST_API int expost_server_port(const expost_server* s);
/* Blocks until expost_server_stop is called from another thread. */
EXPOST_API void expost_server_wait(expost_server* s);
EXPOST_API void expost_server_stop(expost_server* s);
EXPOST_API void expost_server_free(expost_server* s);

#ifdef __cplusplus
}
#endif

#endif /* EXPOST_EXPOST_H_ */
