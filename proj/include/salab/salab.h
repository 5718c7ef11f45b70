/* C interface to the structural acoustics laboratory. Every function returns
 * a salab_status; on failure salab_last_error() holds the message for the
 * calling thread until its next failing call. Handles are opaque and must be
 * released with the matching *_free function. Arrays sized "dim" hold one
 * state vector in block order [z1, z2, w1, w2, theta]. */
#ifndef SALAB_H
#define SALAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SALAB_API __declspec(dllexport)
#else
#define SALAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum salab_status {
  SALAB_OK = 0,
  SALAB_ERR_CONFIG = 1,
  SALAB_ERR_VALIDATION = 2,
  SALAB_ERR_ASSEMBLY = 3,
  SALAB_ERR_DIMENSION = 4,
  SALAB_ERR_FIT = 5,
  SALAB_ERR_NEAR_SPECTRUM = 6,
  SALAB_ERR_STEP = 7,
  SALAB_ERR_IO = 8,
  SALAB_ERR_ARGUMENT = 9,
  SALAB_ERR_BUFFER = 10, /* output buffer too small; *needed is set */
  SALAB_ERR_INTERNAL = 11
} salab_status;

typedef struct salab_config salab_config;
typedef struct salab_model salab_model;
typedef struct salab_trace salab_trace;

SALAB_API const char* salab_last_error(void);
SALAB_API const char* salab_status_name(salab_status status);
SALAB_API const char* salab_version(void);

/* ---- configuration ---- */
SALAB_API salab_status salab_config_default(int dim, salab_config** out);
SALAB_API salab_status salab_config_load(const char* path, salab_config** out);
SALAB_API salab_status salab_config_parse(const char* text, salab_config** out);
SALAB_API salab_status salab_config_copy(const salab_config* config, salab_config** out);
SALAB_API void salab_config_free(salab_config* config);
/* Applies one key = value assignment (model or run key) and revalidates. */
SALAB_API salab_status salab_config_set(salab_config* config, const char* key, const char* value);
/* Copies the value of a key into buf. Run keys that were never set give
 * SALAB_ERR_CONFIG. */
SALAB_API salab_status salab_config_get(const salab_config* config, const char* key, char* buf, size_t cap,
                                        size_t* needed);
/* "key = value" lines, newline terminated; parses back to the same config. */
SALAB_API salab_status salab_config_text(const salab_config* config, char* buf, size_t cap, size_t* needed);

/* ---- model ---- */
SALAB_API salab_status salab_model_build(const salab_config* config, salab_model** out);
SALAB_API void salab_model_free(salab_model* model);
SALAB_API size_t salab_model_dim(const salab_model* model);
/* Block sizes: chamber nodes, interior plate nodes, face nodes. */
SALAB_API void salab_model_layout(const salab_model* model, size_t* chamber, size_t* interior, size_t* face);
/* which: "A", "W", "K" (stiffness) or "M" (mass); writes `row col value` lines. */
SALAB_API salab_status salab_model_export(const salab_model* model, const char* which, const char* path);
/* A applied to a real state. */
SALAB_API salab_status salab_model_apply(const salab_model* model, const double* phi, double* out);
SALAB_API salab_status salab_model_energy_norm(const salab_model* model, const double* phi, double* out);

/* ---- verification ---- */
typedef struct salab_check_report {
  char name[48];
  int trials;
  double worst_residual;
  double tolerance;
  int passed;
} salab_check_report;

SALAB_API salab_status salab_check_dissipation(const salab_model* model, int trials, uint64_t seed,
                                               salab_check_report* out);
SALAB_API salab_status salab_check_trace_adjoints(const salab_model* model, int trials, uint64_t seed,
                                                  salab_check_report* out);
SALAB_API salab_status salab_check_inverse(const salab_model* model, int trials, uint64_t seed,
                                           salab_check_report* out);
SALAB_API salab_status salab_check_energy_balance(const salab_trace* trace, salab_check_report* out);

/* ---- spectrum and resolvent ---- */
/* All eigenvalues (dim of them) sorted by decreasing real part. */
SALAB_API salab_status salab_spectrum_dense(const salab_model* model, double* re, double* im, double* abscissa);
/* One eigenvalue per shift, sorted by decreasing real part. */
SALAB_API salab_status salab_spectrum_shift_invert(const salab_model* model, const double* shift_re,
                                                   const double* shift_im, size_t count, double* re, double* im,
                                                   double* abscissa);

typedef enum salab_norm_method {
  SALAB_NORM_AUTO = 0,
  SALAB_NORM_HESSENBERG = 1,
  SALAB_NORM_DENSE_SVD = 2,
  SALAB_NORM_SPARSE = 3
} salab_norm_method;

typedef struct salab_resolvent_sample {
  double beta;
  double norm;
  double residual;
  int ok;
} salab_resolvent_sample;

typedef struct salab_growth_fit {
  double exponent;
  double constant;
  double beta_min_used;
  int envelope_ok;
  size_t samples_used;
} salab_growth_fit;

SALAB_API salab_status salab_log_spaced(double lo, double hi, int points, double* out);
/* Near-spectrum points come back with ok = 0 rather than failing the call.
 * threads = 0 uses every hardware thread. */
SALAB_API salab_status salab_resolvent_sweep(const salab_model* model, const double* betas, size_t count,
                                             unsigned threads, salab_norm_method method,
                                             salab_resolvent_sample* out);
SALAB_API salab_status salab_fit_growth(const salab_resolvent_sample* samples, size_t count, double beta_min,
                                        salab_growth_fit* out);

/* ---- dynamics ---- */
typedef struct salab_decay_fit {
  double M;
  double sup_ratio;
  double slope;
  double window_begin;
  double window_end;
  size_t samples_used;
} salab_decay_fit;

SALAB_API salab_status salab_random_state(const salab_model* model, uint64_t seed, double* phi);
/* phi0 = A⁻¹Ψ for a seeded unit-energy Ψ; graph_norm = ‖phi0‖ in D(A). */
SALAB_API salab_status salab_classical_data(const salab_model* model, uint64_t seed, double* phi0,
                                            double* graph_norm);
SALAB_API salab_status salab_simulate(const salab_model* model, const double* phi0, double t_end, double dt,
                                      int sample_every, salab_trace** out);
SALAB_API void salab_trace_free(salab_trace* trace);
SALAB_API size_t salab_trace_length(const salab_trace* trace);
SALAB_API salab_status salab_trace_sample(const salab_trace* trace, size_t k, double* t, double* energy,
                                          double* dissipated);
SALAB_API double salab_trace_graph_norm0(const salab_trace* trace);
SALAB_API double salab_trace_dt(const salab_trace* trace);
SALAB_API salab_status salab_fit_decay(const salab_trace* trace, double window_begin, double window_end,
                                       salab_decay_fit* out);

/* ---- geometry ---- */
typedef struct salab_geometry_report {
  int dim;
  int gamma1_convex;
  int satisfied;
  double max_flux;
  double best_x0[3];
  size_t gamma1_nodes;
  size_t candidates;
} salab_geometry_report;

SALAB_API salab_status salab_geometry_check(const salab_config* config, salab_geometry_report* out);
/* One row per (Γ₁ face, node) pair: position (3), outward normal (3) and
 * (x - best_x0)·ν, 7 doubles per row, unused coordinates zero. */
SALAB_API salab_status salab_geometry_nodes(const salab_config* config, double* buf, size_t cap_rows,
                                            size_t* rows);

#ifdef __cplusplus
}
#endif

#endif
