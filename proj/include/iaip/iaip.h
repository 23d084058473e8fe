#ifndef IAIP_IAIP_H
#define IAIP_IAIP_H

/* C interface to the IAIP library: eLasso Ising-prior learning over binary
 * attributes and Markov-blanket correction of latent manipulation vectors.
 *
 * All functions returning iaip_status leave their output untouched on
 * failure; iaip_last_error() then describes the failure for the calling
 * thread. Every handle and buffer is released with its matching _free
 * function, which accepts NULL. */

#include <stddef.h>

#if defined(_WIN32)
#  if defined(IAIP_BUILDING_LIBRARY)
#    define IAIP_API __declspec(dllexport)
#  else
#    define IAIP_API __declspec(dllimport)
#  endif
#else
#  define IAIP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum iaip_status {
  IAIP_OK = 0,
  IAIP_ERR_INVALID_ARGUMENT = 1,
  IAIP_ERR_PARSE = 2,
  IAIP_ERR_SHAPE = 3,
  IAIP_ERR_NON_FINITE = 4,
  IAIP_ERR_CONSTANT_COLUMN = 5,
  IAIP_ERR_NOT_CONVERGED = 6,
  IAIP_ERR_IO = 7,
  IAIP_ERR_INTERNAL = 8
} iaip_status;

IAIP_API const char* iaip_version(void);
IAIP_API const char* iaip_status_string(iaip_status status);
/* Message of the last failure on this thread; "" if none. */
IAIP_API const char* iaip_last_error(void);

/* ---- owned byte buffers ---- */

typedef struct iaip_buffer iaip_buffer;

IAIP_API const char* iaip_buffer_data(const iaip_buffer* b);
IAIP_API size_t iaip_buffer_size(const iaip_buffer* b);
IAIP_API void iaip_buffer_free(iaip_buffer* b);

/* ---- attribute matrices (CelebA list_attr format) ---- */

typedef struct iaip_attrs iaip_attrs;

IAIP_API iaip_status iaip_attrs_parse(const char* data, size_t size, iaip_attrs** out);
IAIP_API iaip_status iaip_attrs_write(const iaip_attrs* a, iaip_buffer** out);
IAIP_API size_t iaip_attrs_rows(const iaip_attrs* a);
IAIP_API size_t iaip_attrs_cols(const iaip_attrs* a);
IAIP_API const char* iaip_attrs_name(const iaip_attrs* a, size_t j);
IAIP_API void iaip_attrs_free(iaip_attrs* a);

/* ---- latent matrices ---- */

typedef enum iaip_latent_format {
  IAIP_LATENT_CSV = 0,
  IAIP_LATENT_RAW = 1 /* LATM: 16-byte header then float32 little-endian */
} iaip_latent_format;

typedef struct iaip_latents iaip_latents;

IAIP_API iaip_status iaip_latents_parse(const char* data, size_t size, iaip_latent_format format,
                                        iaip_latents** out);
/* Copies rows * cols values (row-major). */
IAIP_API iaip_status iaip_latents_create(size_t rows, size_t cols, const double* values, iaip_latents** out);
IAIP_API iaip_status iaip_latents_write(const iaip_latents* l, iaip_latent_format format, iaip_buffer** out);
IAIP_API size_t iaip_latents_rows(const iaip_latents* l);
IAIP_API size_t iaip_latents_cols(const iaip_latents* l);
IAIP_API const double* iaip_latents_data(const iaip_latents* l);
IAIP_API void iaip_latents_free(iaip_latents* l);

/* ---- eLasso graph fitting ---- */

typedef struct iaip_fit_config {
  double gamma;
  size_t n_penalties;
  double min_ratio;
  double tol;
  size_t max_iter;
  size_t threads; /* results do not depend on this */
} iaip_fit_config;

IAIP_API void iaip_fit_config_default(iaip_fit_config* cfg);

typedef struct iaip_graph iaip_graph;

/* On IAIP_ERR_NOT_CONVERGED the message names the node and penalty index. */
IAIP_API iaip_status iaip_fit_graph(const iaip_attrs* a, const iaip_fit_config* cfg, iaip_graph** out);

IAIP_API size_t iaip_graph_size(const iaip_graph* g);
IAIP_API size_t iaip_graph_edge_count(const iaip_graph* g);
IAIP_API size_t iaip_graph_components(const iaip_graph* g);
IAIP_API double iaip_graph_gamma(const iaip_graph* g);
IAIP_API const char* iaip_graph_name(const iaip_graph* g, size_t j);
IAIP_API double iaip_graph_threshold(const iaip_graph* g, size_t j);
IAIP_API double iaip_graph_weight(const iaip_graph* g, size_t j, size_t k);

/* Per-node CSV; only for graphs produced by iaip_fit_graph. */
IAIP_API iaip_status iaip_graph_diagnostics(const iaip_graph* g, iaip_buffer** out);

IAIP_API iaip_status iaip_graph_read(const char* data, size_t size, iaip_graph** out);
IAIP_API iaip_status iaip_graph_write(const iaip_graph* g, iaip_buffer** out);
/* 16 lowercase hex digits plus NUL. */
IAIP_API iaip_status iaip_graph_digest(const iaip_graph* g, char out[17]);

typedef enum iaip_export_format {
  IAIP_EXPORT_GRAPHML = 0,
  IAIP_EXPORT_DOT = 1,
  IAIP_EXPORT_EDGE_CSV = 2
} iaip_export_format;

IAIP_API iaip_status iaip_graph_export(const iaip_graph* g, iaip_export_format format, iaip_buffer** out);
IAIP_API void iaip_graph_free(iaip_graph* g);

/* ---- gamma selection ---- */

typedef struct iaip_sweep iaip_sweep;

typedef struct iaip_sweep_row {
  double gamma;
  size_t edges;
  size_t isolated;
  size_t components;
} iaip_sweep_row;

/* grid is "start:stop:step"; cfg->gamma is ignored. */
IAIP_API iaip_status iaip_select_gamma(const iaip_attrs* a, const char* grid, const iaip_fit_config* cfg,
                                       iaip_sweep** out);
IAIP_API size_t iaip_sweep_rows(const iaip_sweep* s);
IAIP_API iaip_status iaip_sweep_row_at(const iaip_sweep* s, size_t i, iaip_sweep_row* out);
/* 1 and *gamma set when some grid value gives a connected graph, else 0. */
IAIP_API int iaip_sweep_selected(const iaip_sweep* s, double* gamma);
IAIP_API iaip_status iaip_sweep_write(const iaip_sweep* s, iaip_buffer** out);
IAIP_API void iaip_sweep_free(iaip_sweep* s);

/* ---- manipulation vectors ---- */

typedef struct iaip_vectors iaip_vectors;

IAIP_API iaip_status iaip_vectors_compute(const iaip_latents* latents, const iaip_attrs* a, iaip_vectors** out);
/* Result carries the corrected vectors; mu = 0 reproduces the input. */
IAIP_API iaip_status iaip_vectors_correct(const iaip_vectors* v, const iaip_graph* g, double mu,
                                          iaip_vectors** out);
IAIP_API size_t iaip_vectors_count(const iaip_vectors* v);
IAIP_API size_t iaip_vectors_dim(const iaip_vectors* v);
IAIP_API const char* iaip_vectors_name(const iaip_vectors* v, size_t i);
/* 1 if the vectors hold (or were loaded from) a Markov-blanket correction. */
IAIP_API int iaip_vectors_corrected(const iaip_vectors* v);

/* Splits v into a manifest and a matrix (corrected rows when present).
 * graph may be NULL; when given, its digest is recorded. */
IAIP_API iaip_status iaip_vectors_store(const iaip_vectors* v, const iaip_graph* g, iaip_buffer** manifest,
                                        iaip_latents** matrix);
IAIP_API iaip_status iaip_vectors_load(const char* manifest, size_t size, const iaip_latents* matrix,
                                       iaip_vectors** out);
IAIP_API void iaip_vectors_free(iaip_vectors* v);

typedef enum iaip_mode { IAIP_MODE_NAIVE = 0, IAIP_MODE_MARKOV_BLANKET = 1 } iaip_mode;

/* out receives dim values. names are matched case-sensitively; g may be NULL
 * in naive mode. */
IAIP_API iaip_status iaip_apply(const iaip_vectors* v, const iaip_graph* g, const double* latent, size_t dim,
                                const char* const* names, const double* alphas, size_t n_edits, iaip_mode mode,
                                double mu, double* out);

/* ---- weight / distance correlation ---- */

typedef struct iaip_correlation iaip_correlation;

IAIP_API iaip_status iaip_correlate(const iaip_vectors* v, const iaip_graph* g, iaip_correlation** out);
IAIP_API double iaip_correlation_r(const iaip_correlation* c);
IAIP_API double iaip_correlation_p(const iaip_correlation* c);
IAIP_API size_t iaip_correlation_pairs(const iaip_correlation* c);
IAIP_API iaip_status iaip_correlation_write(const iaip_correlation* c, iaip_buffer** out);
IAIP_API void iaip_correlation_free(iaip_correlation* c);

#ifdef __cplusplus
}
#endif

#endif
