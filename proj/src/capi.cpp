#include "iaip/iaip.h"

#include <algorithm>
#include <cstring>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "iaip/attr_io.hpp"
#include "iaip/debias.hpp"
#include "iaip/elasso.hpp"
#include "iaip/error.hpp"
#include "iaip/ising_graph.hpp"

struct iaip_buffer {
  std::string bytes;
};

struct iaip_attrs {
  iaip::io::AttributeMatrix m;
};

struct iaip_latents {
  iaip::io::LatentMatrix m;
};

struct iaip_graph {
  iaip::graph::IsingGraph g;
  std::optional<std::vector<iaip::elasso::NodewiseFit>> fits;
};

struct iaip_sweep {
  iaip::graph::GammaSweepReport r;
};

struct iaip_vectors {
  iaip::debias::ManipulationVectors v;
  bool loaded_corrected = false;
};

struct iaip_correlation {
  iaip::debias::CorrelationReport r;
  std::vector<std::string> names;
};

namespace {

thread_local std::string last_error;

iaip_status status_of(iaip::ErrorCode code) {
  using iaip::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return IAIP_ERR_INVALID_ARGUMENT;
    case ErrorCode::Parse: return IAIP_ERR_PARSE;
    case ErrorCode::Shape: return IAIP_ERR_SHAPE;
    case ErrorCode::NonFinite: return IAIP_ERR_NON_FINITE;
    case ErrorCode::ConstantColumn: return IAIP_ERR_CONSTANT_COLUMN;
    case ErrorCode::NotConverged: return IAIP_ERR_NOT_CONVERGED;
    case ErrorCode::Io: return IAIP_ERR_IO;
  }
  return IAIP_ERR_INTERNAL;
}

iaip_status fail(iaip_status s, std::string msg) {
  last_error = std::move(msg);
  return s;
}

template <class F>
iaip_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return IAIP_OK;
  } catch (const iaip::ConvergenceError& e) {
    return fail(IAIP_ERR_NOT_CONVERGED, std::string(e.what()) + " (kkt residual " + std::to_string(e.residual()) + ')');
  } catch (const iaip::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(IAIP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(IAIP_ERR_INTERNAL, e.what());
  }
}

#define IAIP_REQUIRE(cond)                                                         \
  do {                                                                             \
    if (!(cond)) return fail(IAIP_ERR_INVALID_ARGUMENT, "null argument: " #cond); \
  } while (0)

iaip_status put_buffer(std::string bytes, iaip_buffer** out) {
  *out = new iaip_buffer{std::move(bytes)};
  return IAIP_OK;
}

iaip::elasso::FitConfig to_config(const iaip_fit_config& c) {
  iaip::elasso::FitConfig cfg;
  cfg.gamma = c.gamma;
  cfg.n_penalties = c.n_penalties;
  cfg.min_ratio = c.min_ratio;
  cfg.tol = c.tol;
  cfg.max_iter = c.max_iter;
  return cfg;
}

std::size_t thread_count(const iaip_fit_config& c) { return c.threads == 0 ? 1 : c.threads; }

iaip::io::LatentFormat to_format(iaip_latent_format f) {
  if (f == IAIP_LATENT_CSV) return iaip::io::LatentFormat::Csv;
  if (f == IAIP_LATENT_RAW) return iaip::io::LatentFormat::Raw;
  throw iaip::Error(iaip::ErrorCode::InvalidArgument, "unknown latent format");
}

}  // namespace

extern "C" {

const char* iaip_version(void) { return "0.1.0"; }

const char* iaip_status_string(iaip_status status) {
  switch (status) {
    case IAIP_OK: return "ok";
    case IAIP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case IAIP_ERR_PARSE: return "parse error";
    case IAIP_ERR_SHAPE: return "shape mismatch";
    case IAIP_ERR_NON_FINITE: return "non-finite value";
    case IAIP_ERR_CONSTANT_COLUMN: return "constant column";
    case IAIP_ERR_NOT_CONVERGED: return "not converged";
    case IAIP_ERR_IO: return "i/o error";
    case IAIP_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* iaip_last_error(void) { return last_error.c_str(); }

const char* iaip_buffer_data(const iaip_buffer* b) { return b ? b->bytes.data() : nullptr; }
size_t iaip_buffer_size(const iaip_buffer* b) { return b ? b->bytes.size() : 0; }
void iaip_buffer_free(iaip_buffer* b) { delete b; }

iaip_status iaip_attrs_parse(const char* data, size_t size, iaip_attrs** out) {
  IAIP_REQUIRE(out && (data || size == 0));
  return guarded([&] { *out = new iaip_attrs{iaip::io::parse_celeba_attributes({data, size})}; });
}

iaip_status iaip_attrs_write(const iaip_attrs* a, iaip_buffer** out) {
  IAIP_REQUIRE(a && out);
  return guarded([&] { put_buffer(iaip::io::write_celeba_attributes(a->m), out); });
}

size_t iaip_attrs_rows(const iaip_attrs* a) { return a ? a->m.rows() : 0; }
size_t iaip_attrs_cols(const iaip_attrs* a) { return a ? a->m.cols() : 0; }
const char* iaip_attrs_name(const iaip_attrs* a, size_t j) {
  return a && j < a->m.cols() ? a->m.names()[j].c_str() : nullptr;
}
void iaip_attrs_free(iaip_attrs* a) { delete a; }

iaip_status iaip_latents_parse(const char* data, size_t size, iaip_latent_format format, iaip_latents** out) {
  IAIP_REQUIRE(out && (data || size == 0));
  return guarded([&] { *out = new iaip_latents{iaip::io::parse_latents({data, size}, to_format(format))}; });
}

iaip_status iaip_latents_create(size_t rows, size_t cols, const double* values, iaip_latents** out) {
  IAIP_REQUIRE(out && (values || rows * cols == 0));
  return guarded([&] {
    *out = new iaip_latents{iaip::io::LatentMatrix(rows, cols, std::vector<double>(values, values + rows * cols))};
  });
}

iaip_status iaip_latents_write(const iaip_latents* l, iaip_latent_format format, iaip_buffer** out) {
  IAIP_REQUIRE(l && out);
  return guarded([&] { put_buffer(iaip::io::write_latents(l->m, to_format(format)), out); });
}

size_t iaip_latents_rows(const iaip_latents* l) { return l ? l->m.rows() : 0; }
size_t iaip_latents_cols(const iaip_latents* l) { return l ? l->m.cols() : 0; }
const double* iaip_latents_data(const iaip_latents* l) { return l ? l->m.data().data() : nullptr; }
void iaip_latents_free(iaip_latents* l) { delete l; }

void iaip_fit_config_default(iaip_fit_config* cfg) {
  if (!cfg) return;
  const iaip::elasso::FitConfig d;
  cfg->gamma = d.gamma;
  cfg->n_penalties = d.n_penalties;
  cfg->min_ratio = d.min_ratio;
  cfg->tol = d.tol;
  cfg->max_iter = d.max_iter;
  cfg->threads = 1;
}

iaip_status iaip_fit_graph(const iaip_attrs* a, const iaip_fit_config* cfg, iaip_graph** out) {
  IAIP_REQUIRE(a && cfg && out);
  return guarded([&] {
    auto fitted = iaip::graph::fit_graph(a->m, to_config(*cfg), thread_count(*cfg));
    *out = new iaip_graph{std::move(fitted.graph), std::move(fitted.fits)};
  });
}

size_t iaip_graph_size(const iaip_graph* g) { return g ? g->g.size() : 0; }
size_t iaip_graph_edge_count(const iaip_graph* g) { return g ? g->g.edge_count() : 0; }
size_t iaip_graph_components(const iaip_graph* g) { return g ? iaip::graph::connected(g->g).components : 0; }
double iaip_graph_gamma(const iaip_graph* g) { return g ? g->g.gamma() : 0.0; }
const char* iaip_graph_name(const iaip_graph* g, size_t j) {
  return g && j < g->g.size() ? g->g.names()[j].c_str() : nullptr;
}
double iaip_graph_threshold(const iaip_graph* g, size_t j) {
  return g && j < g->g.size() ? g->g.thresholds()[j] : 0.0;
}
double iaip_graph_weight(const iaip_graph* g, size_t j, size_t k) {
  return g && j < g->g.size() && k < g->g.size() ? g->g.weight(j, k) : 0.0;
}

iaip_status iaip_graph_diagnostics(const iaip_graph* g, iaip_buffer** out) {
  IAIP_REQUIRE(g && out);
  if (!g->fits) return fail(IAIP_ERR_INVALID_ARGUMENT, "graph was not produced by a fit; no diagnostics");
  return guarded([&] { put_buffer(iaip::graph::write_fit_diagnostics({g->g, *g->fits}), out); });
}

iaip_status iaip_graph_read(const char* data, size_t size, iaip_graph** out) {
  IAIP_REQUIRE(out && (data || size == 0));
  return guarded([&] { *out = new iaip_graph{iaip::graph::read_graph_document({data, size}), std::nullopt}; });
}

iaip_status iaip_graph_write(const iaip_graph* g, iaip_buffer** out) {
  IAIP_REQUIRE(g && out);
  return guarded([&] { put_buffer(iaip::graph::write_graph_document(g->g), out); });
}

iaip_status iaip_graph_digest(const iaip_graph* g, char out[17]) {
  IAIP_REQUIRE(g && out);
  return guarded([&] {
    const auto d = iaip::graph::graph_digest(g->g);
    std::memcpy(out, d.c_str(), 17);
  });
}

iaip_status iaip_graph_export(const iaip_graph* g, iaip_export_format format, iaip_buffer** out) {
  IAIP_REQUIRE(g && out);
  using iaip::graph::ExportFormat;
  ExportFormat f;
  switch (format) {
    case IAIP_EXPORT_GRAPHML: f = ExportFormat::GraphML; break;
    case IAIP_EXPORT_DOT: f = ExportFormat::Dot; break;
    case IAIP_EXPORT_EDGE_CSV: f = ExportFormat::EdgeCsv; break;
    default: return fail(IAIP_ERR_INVALID_ARGUMENT, "unknown export format");
  }
  return guarded([&] { put_buffer(iaip::graph::export_graph(g->g, f), out); });
}

void iaip_graph_free(iaip_graph* g) { delete g; }

iaip_status iaip_select_gamma(const iaip_attrs* a, const char* grid, const iaip_fit_config* cfg, iaip_sweep** out) {
  IAIP_REQUIRE(a && grid && cfg && out);
  return guarded([&] {
    const auto values = iaip::graph::parse_gamma_grid(grid);
    *out = new iaip_sweep{iaip::graph::select_gamma(a->m, values, to_config(*cfg), thread_count(*cfg))};
  });
}

size_t iaip_sweep_rows(const iaip_sweep* s) { return s ? s->r.rows.size() : 0; }

iaip_status iaip_sweep_row_at(const iaip_sweep* s, size_t i, iaip_sweep_row* out) {
  IAIP_REQUIRE(s && out);
  if (i >= s->r.rows.size()) return fail(IAIP_ERR_INVALID_ARGUMENT, "sweep row out of range");
  const auto& r = s->r.rows[i];
  *out = {r.gamma, r.edges, r.isolated, r.components};
  return IAIP_OK;
}

int iaip_sweep_selected(const iaip_sweep* s, double* gamma) {
  if (!s || !s->r.selected) return 0;
  if (gamma) *gamma = *s->r.selected;
  return 1;
}

iaip_status iaip_sweep_write(const iaip_sweep* s, iaip_buffer** out) {
  IAIP_REQUIRE(s && out);
  return guarded([&] { put_buffer(iaip::graph::write_sweep_report(s->r), out); });
}

void iaip_sweep_free(iaip_sweep* s) { delete s; }

iaip_status iaip_vectors_compute(const iaip_latents* latents, const iaip_attrs* a, iaip_vectors** out) {
  IAIP_REQUIRE(latents && a && out);
  return guarded([&] { *out = new iaip_vectors{iaip::debias::compute_manip_vectors(latents->m, a->m)}; });
}

iaip_status iaip_vectors_correct(const iaip_vectors* v, const iaip_graph* g, double mu, iaip_vectors** out) {
  IAIP_REQUIRE(v && g && out);
  if (v->loaded_corrected || v->v.corrected())
    return fail(IAIP_ERR_INVALID_ARGUMENT, "vectors are already corrected");
  return guarded([&] { *out = new iaip_vectors{iaip::debias::mb_correct(v->v, g->g, mu)}; });
}

size_t iaip_vectors_count(const iaip_vectors* v) { return v ? v->v.size() : 0; }
size_t iaip_vectors_dim(const iaip_vectors* v) { return v ? v->v.dim() : 0; }
const char* iaip_vectors_name(const iaip_vectors* v, size_t i) {
  return v && i < v->v.size() ? v->v.names()[i].c_str() : nullptr;
}
int iaip_vectors_corrected(const iaip_vectors* v) {
  return v && (v->loaded_corrected || v->v.corrected().has_value()) ? 1 : 0;
}

iaip_status iaip_vectors_store(const iaip_vectors* v, const iaip_graph* g, iaip_buffer** manifest,
                               iaip_latents** matrix) {
  IAIP_REQUIRE(v && manifest && matrix);
  if (v->loaded_corrected) return fail(IAIP_ERR_INVALID_ARGUMENT, "loaded corrected vectors cannot be re-stored");
  return guarded([&] {
    std::optional<std::string> digest;
    if (g) digest = iaip::graph::graph_digest(g->g);
    auto stored = iaip::debias::store_vectors(v->v, digest);
    auto text = iaip::debias::write_vector_manifest(stored.manifest);
    auto* m = new iaip_latents{std::move(stored.matrix)};
    *manifest = new iaip_buffer{std::move(text)};
    *matrix = m;
  });
}

iaip_status iaip_vectors_load(const char* manifest, size_t size, const iaip_latents* matrix, iaip_vectors** out) {
  IAIP_REQUIRE(manifest && matrix && out);
  return guarded([&] {
    auto m = iaip::debias::read_vector_manifest({manifest, size});
    const bool corrected = m.kind == iaip::debias::VectorManifest::Kind::Corrected;
    auto v = iaip::debias::load_vectors({std::move(m), matrix->m});
    *out = new iaip_vectors{std::move(v), corrected};
  });
}

void iaip_vectors_free(iaip_vectors* v) { delete v; }

iaip_status iaip_apply(const iaip_vectors* v, const iaip_graph* g, const double* latent, size_t dim,
                       const char* const* names, const double* alphas, size_t n_edits, iaip_mode mode, double mu,
                       double* out) {
  IAIP_REQUIRE(v && latent && out && (n_edits == 0 || (names && alphas)));
  if (mode != IAIP_MODE_NAIVE && mode != IAIP_MODE_MARKOV_BLANKET)
    return fail(IAIP_ERR_INVALID_ARGUMENT, "unknown manipulation mode");
  if (mode == IAIP_MODE_MARKOV_BLANKET && iaip_vectors_corrected(v))
    return fail(IAIP_ERR_INVALID_ARGUMENT, "Markov-blanket mode expects uncorrected vectors");
  return guarded([&] {
    iaip::debias::ManipulationRequest req;
    req.latent.assign(latent, latent + dim);
    req.mode = mode == IAIP_MODE_NAIVE ? iaip::debias::Mode::Naive : iaip::debias::Mode::MarkovBlanket;
    for (size_t e = 0; e < n_edits; ++e) {
      if (!names[e]) throw iaip::Error(iaip::ErrorCode::InvalidArgument, "null attribute name");
      const auto i = v->v.find(names[e]);
      if (i == iaip::debias::ManipulationVectors::npos)
        throw iaip::Error(iaip::ErrorCode::InvalidArgument, std::string("unknown attribute '") + names[e] + "'");
      req.edits.push_back({i, alphas[e]});
    }
    const auto z = iaip::debias::apply_manipulation(req, v->v, g ? &g->g : nullptr, mu);
    std::copy(z.begin(), z.end(), out);
  });
}

iaip_status iaip_correlate(const iaip_vectors* v, const iaip_graph* g, iaip_correlation** out) {
  IAIP_REQUIRE(v && g && out);
  return guarded([&] {
    *out = new iaip_correlation{iaip::debias::weight_distance_correlation(v->v, g->g), v->v.names()};
  });
}

double iaip_correlation_r(const iaip_correlation* c) { return c ? c->r.pearson_r : 0.0; }
double iaip_correlation_p(const iaip_correlation* c) { return c ? c->r.p_value : 1.0; }
size_t iaip_correlation_pairs(const iaip_correlation* c) { return c ? c->r.pairs.size() : 0; }

iaip_status iaip_correlation_write(const iaip_correlation* c, iaip_buffer** out) {
  IAIP_REQUIRE(c && out);
  return guarded([&] { put_buffer(iaip::debias::write_correlation_csv(c->r, c->names), out); });
}

void iaip_correlation_free(iaip_correlation* c) { delete c; }

}  // extern "C"
