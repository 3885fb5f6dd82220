/* smld: stochastic mirror Langevin dynamics with Lyapunov variance correction.
 *
 * Plain C interface. Every function returns an smld_status; on failure a
 * thread-local message is available from smld_last_error_message(). Handles
 * are opaque and owned by the caller, who releases them with the matching
 * *_destroy function. Matrices are dense, row-major.
 */
#ifndef SMLD_H
#define SMLD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SMLD_API __declspec(dllexport)
#else
#define SMLD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum smld_status {
  SMLD_OK = 0,
  SMLD_ERR_DOMAIN = 1,     /* point outside a constrained domain */
  SMLD_ERR_SHAPE = 2,      /* dimension mismatch */
  SMLD_ERR_SINGULAR = 3,   /* numerically singular matrix */
  SMLD_ERR_CONFIG = 4,     /* invalid configuration or argument */
  SMLD_ERR_IO = 5,
  SMLD_ERR_DEGENERATE = 6, /* moments do not exist */
  SMLD_ERR_DIVERGED = 7,   /* chain left the domain or blew up */
  SMLD_ERR_CORRECTION = 8, /* variance correction could not be computed */
  SMLD_ERR_INTERNAL = 9
} smld_status;

/* Message for the last failing call on this thread ("" if none). */
SMLD_API const char* smld_last_error_message(void);
SMLD_API const char* smld_status_name(smld_status status);
SMLD_API const char* smld_version(void);

/* ---- mirror maps ---------------------------------------------------------
 * Blocks: Euclidean (phi = |b|^2/2), positive scalars (phi = -sum log s),
 * positive-definite q x q matrices stored as vech, lower triangle
 * column-major (phi = -log det W). Products concatenate blocks. */
typedef struct smld_mirror_map smld_mirror_map;

SMLD_API smld_status smld_mirror_map_euclidean(size_t dim, smld_mirror_map** out);
SMLD_API smld_status smld_mirror_map_log_barrier(size_t dim, smld_mirror_map** out);
SMLD_API smld_status smld_mirror_map_log_det_pd(size_t q, smld_mirror_map** out);
SMLD_API smld_status smld_mirror_map_product(const smld_mirror_map* const* parts, size_t count,
                                             smld_mirror_map** out);
SMLD_API void smld_mirror_map_destroy(smld_mirror_map* map);
SMLD_API size_t smld_mirror_map_dim(const smld_mirror_map* map);

/* theta -> vartheta and back; both arrays have length dim. */
SMLD_API smld_status smld_mirror_map_grad_phi(const smld_mirror_map* map, const double* theta, double* vartheta);
SMLD_API smld_status smld_mirror_map_grad_phi_star(const smld_mirror_map* map, const double* vartheta,
                                                   double* theta);

/* ---- Lyapunov solve ------------------------------------------------------
 * Solves X J^{-1} V + V J^{-1} X = 2 Gamma for symmetric d x d inputs with J
 * and V positive definite. residual_out may be NULL. */
SMLD_API smld_status smld_lyapunov_solve(size_t d, const double* J, const double* V, const double* Gamma,
                                         double* X_out, double* residual_out);

/* ---- commands ------------------------------------------------------------
 * Runs simulate | fit | gibbs | oracle | demo-divergence with a JSON config
 * string, writing artefacts into out_dir. A diverged chain or a failed
 * correction is reported through the result (exit code 2 or 3) and returns
 * SMLD_OK; hard errors (bad config, I/O) return a non-OK status. */
typedef struct smld_run_result smld_run_result;

typedef struct smld_run_options {
  int has_seed;        /* non-zero: seed overrides the config seed */
  uint64_t seed;
  double max_seconds;  /* 0 = unlimited */
} smld_run_options;

SMLD_API smld_status smld_command_run(const char* command, const char* config_json, const char* out_dir,
                                      const smld_run_options* options, smld_run_result** out);
SMLD_API int smld_run_result_exit_code(const smld_run_result* result);
SMLD_API const char* smld_run_result_status(const smld_run_result* result);
SMLD_API const char* smld_run_result_report_json(const smld_run_result* result);
SMLD_API void smld_run_result_destroy(smld_run_result* result);

#ifdef __cplusplus
}
#endif

#endif /* SMLD_H */
