// iaip: learn an inter-attribute Ising prior and debias latent manipulations.

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "iaip/iaip.h"
#include "json.hpp"

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitSolver = 2;

struct Failure {
  int exit_code;
  std::string message;
};

[[noreturn]] void input_error(const std::string& msg) { throw Failure{kExitInput, msg}; }

void check(iaip_status s, const std::string& context) {
  if (s == IAIP_OK) return;
  const int code = s == IAIP_ERR_NOT_CONVERGED ? kExitSolver : kExitInput;
  throw Failure{code, context + ": " + iaip_status_string(s) + ": " + iaip_last_error()};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Buffer = std::unique_ptr<iaip_buffer, Deleter<iaip_buffer, iaip_buffer_free>>;
using Attrs = std::unique_ptr<iaip_attrs, Deleter<iaip_attrs, iaip_attrs_free>>;
using Latents = std::unique_ptr<iaip_latents, Deleter<iaip_latents, iaip_latents_free>>;
using Graph = std::unique_ptr<iaip_graph, Deleter<iaip_graph, iaip_graph_free>>;
using Sweep = std::unique_ptr<iaip_sweep, Deleter<iaip_sweep, iaip_sweep_free>>;
using Vectors = std::unique_ptr<iaip_vectors, Deleter<iaip_vectors, iaip_vectors_free>>;
using Correlation = std::unique_ptr<iaip_correlation, Deleter<iaip_correlation, iaip_correlation_free>>;

std::string bytes_of(const Buffer& b) { return {iaip_buffer_data(b.get()), iaip_buffer_size(b.get())}; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) input_error("cannot open '" + path + "': " + std::strerror(errno));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) input_error("cannot read '" + path + "'");
  return ss.str();
}

// Collects every output of a command and publishes them together: each file
// is written to a temporary sibling, then all are renamed into place. On any
// failure nothing new is left behind.
class Outputs {
 public:
  void add(std::string path, std::string bytes) { files_.push_back({std::move(path), std::move(bytes)}); }

  void commit() {
    std::vector<std::string> temps;
    auto cleanup = [&](std::size_t renamed) {
      for (std::size_t i = renamed; i < temps.size(); ++i) std::remove(temps[i].c_str());
      for (std::size_t i = 0; i < renamed; ++i) std::remove(files_[i].path.c_str());
    };
    for (const auto& f : files_) {
      std::string tmp = f.path + ".tmp." + std::to_string(::getpid());
      temps.push_back(tmp);
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (out) out.write(f.bytes.data(), static_cast<std::streamsize>(f.bytes.size()));
      if (out) out.close();
      if (!out) {
        cleanup(0);
        input_error("cannot write '" + f.path + "'");
      }
    }
    for (std::size_t i = 0; i < files_.size(); ++i) {
      if (std::rename(temps[i].c_str(), files_[i].path.c_str()) != 0) {
        const std::string why = std::strerror(errno);
        cleanup(i);
        input_error("cannot move output into place at '" + files_[i].path + "': " + why);
      }
    }
  }

 private:
  struct File {
    std::string path;
    std::string bytes;
  };
  std::vector<File> files_;
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

bool is_raw(const std::string& bytes) { return bytes.size() >= 4 && bytes.compare(0, 4, "LATM") == 0; }

iaip_latent_format resolve_format(const std::string& flag, bool input_raw) {
  if (flag == "raw") return IAIP_LATENT_RAW;
  if (flag == "csv") return IAIP_LATENT_CSV;
  return input_raw ? IAIP_LATENT_RAW : IAIP_LATENT_CSV;
}

const char* format_name(iaip_latent_format f) { return f == IAIP_LATENT_RAW ? "raw" : "csv"; }

Attrs load_attrs(const std::string& path) {
  const auto text = read_file(path);
  iaip_attrs* a = nullptr;
  check(iaip_attrs_parse(text.data(), text.size(), &a), path);
  return Attrs(a);
}

Latents load_latents(const std::string& path, bool* raw = nullptr) {
  const auto bytes = read_file(path);
  const bool r = is_raw(bytes);
  if (raw) *raw = r;
  iaip_latents* l = nullptr;
  check(iaip_latents_parse(bytes.data(), bytes.size(), r ? IAIP_LATENT_RAW : IAIP_LATENT_CSV, &l), path);
  return Latents(l);
}

Graph load_graph(const std::string& path) {
  const auto text = read_file(path);
  iaip_graph* g = nullptr;
  check(iaip_graph_read(text.data(), text.size(), &g), path);
  return Graph(g);
}

std::string manifest_path(const std::string& vectors_path) { return vectors_path + ".manifest"; }
std::string config_path(const std::string& out) { return out + ".config.json"; }

Vectors load_vectors(const std::string& path, bool* raw = nullptr) {
  auto matrix = load_latents(path, raw);
  const auto manifest = read_file(manifest_path(path));
  iaip_vectors* v = nullptr;
  check(iaip_vectors_load(manifest.data(), manifest.size(), matrix.get(), &v), manifest_path(path));
  return Vectors(v);
}

std::string graph_digest(const Graph& g) {
  char d[17];
  check(iaip_graph_digest(g.get(), d), "graph digest");
  return d;
}

void store_vectors(Outputs& out, const Vectors& v, const iaip_graph* g, const std::string& path,
                   iaip_latent_format format) {
  iaip_buffer* manifest = nullptr;
  iaip_latents* matrix = nullptr;
  check(iaip_vectors_store(v.get(), g, &manifest, &matrix), "store vectors");
  Buffer m(manifest);
  Latents mat(matrix);
  iaip_buffer* bytes = nullptr;
  check(iaip_latents_write(mat.get(), format, &bytes), "write vectors");
  out.add(path, bytes_of(Buffer(bytes)));
  out.add(manifest_path(path), bytes_of(m));
}

// Parses "Name=+2.0" or a comma list of them.
void parse_edits(const std::vector<std::string>& specs, std::vector<std::string>& names,
                 std::vector<double>& alphas) {
  for (const auto& spec : specs) {
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos || eq == 0) input_error("malformed edit '" + item + "', expected Name=alpha");
      std::string value = item.substr(eq + 1);
      const char* first = value.data();
      const char* last = value.data() + value.size();
      if (first != last && *first == '+') ++first;
      double alpha = 0.0;
      auto [ptr, ec] = std::from_chars(first, last, alpha);
      if (ec != std::errc() || ptr != last || first == last || !std::isfinite(alpha))
        input_error("malformed edit weight in '" + item + "'");
      names.push_back(item.substr(0, eq));
      alphas.push_back(alpha);
    }
  }
}

struct SolverFlags {
  double gamma = 0.25;
  std::size_t n_penalties = 100;
  double min_ratio = 1e-4;
  double tol = 1e-7;
  std::size_t max_iter = 1000;

  void add_to(CLI::App* cmd, bool with_gamma) {
    if (with_gamma)
      cmd->add_option("--gamma", gamma, "EBIC prior strength")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--n-penalties", n_penalties, "penalties per regularization path")
        ->capture_default_str()
        ->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
    cmd->add_option("--min-ratio", min_ratio, "smallest / largest penalty")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--tol", tol, "solver tolerance on coefficient change")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-iter", max_iter, "outer solver iterations per penalty")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  }

  iaip_fit_config config(std::size_t threads) const {
    iaip_fit_config c;
    iaip_fit_config_default(&c);
    c.gamma = gamma;
    c.n_penalties = n_penalties;
    c.min_ratio = min_ratio;
    c.tol = tol;
    c.max_iter = max_iter;
    c.threads = threads;
    return c;
  }

  void record(json& j, bool with_gamma) const {
    if (with_gamma) j["gamma"] = gamma;
    j["n_penalties"] = n_penalties;
    j["min_ratio"] = min_ratio;
    j["tol"] = tol;
    j["max_iter"] = max_iter;
  }
};

json provenance(const std::string& command) {
  json j;
  j["command"] = command;
  j["version"] = iaip_version();
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inter-attribute Ising prior learning and Markov-blanket latent debiasing"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(iaip_version()));

  std::size_t threads = 1;
  auto add_threads = [&](CLI::App* cmd) {
    cmd->add_option("--threads", threads, "worker threads for nodewise fits (output does not depend on it)")
        ->capture_default_str()
        ->check(CLI::Range(std::size_t{1}, std::size_t{1024}));
  };

  // fit
  auto* fit = app.add_subcommand("fit", "fit the Ising graph at one gamma");
  std::string fit_attrs, fit_out;
  SolverFlags fit_solver;
  fit->add_option("--attrs", fit_attrs, "attribute file (CelebA list_attr format)")->required();
  fit->add_option("--out", fit_out, "graph document to write")->required();
  fit_solver.add_to(fit, true);
  add_threads(fit);

  // select-gamma
  auto* sel = app.add_subcommand("select-gamma", "sweep gamma and pick the largest connected one");
  std::string sel_attrs, sel_out, sel_grid = "0:10:0.1";
  SolverFlags sel_solver;
  sel->add_option("--attrs", sel_attrs, "attribute file (CelebA list_attr format)")->required();
  sel->add_option("--grid", sel_grid, "gamma grid start:stop:step")->capture_default_str();
  sel->add_option("--out", sel_out, "sweep report to write")->required();
  sel_solver.add_to(sel, false);
  add_threads(sel);

  // export
  auto* exp = app.add_subcommand("export", "export a graph for visualization tools");
  std::string exp_graph, exp_out, exp_format = "graphml";
  exp->add_option("--graph", exp_graph, "graph document")->required();
  exp->add_option("--format", exp_format, "graphml, dot or edge-csv")
      ->capture_default_str()
      ->check(CLI::IsMember({"graphml", "dot", "edge-csv"}));
  exp->add_option("--out", exp_out, "file to write")->required();

  // vectors
  auto* vec = app.add_subcommand("vectors", "compute manipulation vectors from latents and attributes");
  std::string vec_latents, vec_attrs, vec_out, vec_format = "auto";
  vec->add_option("--latents", vec_latents, "latent matrix (LATM raw or CSV), one row per attribute row")
      ->required();
  vec->add_option("--attrs", vec_attrs, "attribute file (CelebA list_attr format)")->required();
  vec->add_option("--out", vec_out, "vector matrix to write; manifest goes to <out>.manifest")->required();
  vec->add_option("--format", vec_format, "output format: auto (same as input), raw or csv")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "raw", "csv"}));

  // correct
  auto* cor = app.add_subcommand("correct", "apply the Markov-blanket correction to manipulation vectors");
  std::string cor_vectors, cor_graph, cor_out, cor_format = "auto";
  double cor_mu = 0.15;
  cor->add_option("--vectors", cor_vectors, "vector matrix with <path>.manifest")->required();
  cor->add_option("--graph", cor_graph, "graph document")->required();
  cor->add_option("--mu", cor_mu, "correction strength")->capture_default_str();
  cor->add_option("--out", cor_out, "corrected vector matrix; manifest goes to <out>.manifest")->required();
  cor->add_option("--format", cor_format, "output format: auto (same as input), raw or csv")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "raw", "csv"}));

  // apply
  auto* apl = app.add_subcommand("apply", "move one latent along attribute directions");
  std::string apl_vectors, apl_graph, apl_latent, apl_out, apl_mode = "mb", apl_format = "auto";
  std::size_t apl_row = 0;
  double apl_mu = 0.15;
  std::vector<std::string> apl_edits;
  apl->add_option("--vectors", apl_vectors, "uncorrected vector matrix with <path>.manifest")->required();
  apl->add_option("--graph", apl_graph, "graph document (required in mb mode)");
  apl->add_option("--latent", apl_latent, "latent matrix holding the input latent")->required();
  apl->add_option("--row", apl_row, "row of --latent to manipulate")->capture_default_str();
  apl->add_option("--edit", apl_edits, "Name=alpha, repeatable or comma separated");
  apl->add_option("--mode", apl_mode, "naive or mb (Markov-blanket corrected)")
      ->capture_default_str()
      ->check(CLI::IsMember({"naive", "mb"}));
  apl->add_option("--mu", apl_mu, "correction strength in mb mode")->capture_default_str();
  apl->add_option("--out", apl_out, "one-row latent file to write")->required();
  apl->add_option("--format", apl_format, "output format: auto (same as input), raw or csv")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "raw", "csv"}));

  // correlate
  auto* crl = app.add_subcommand("correlate", "correlate edge weights with vector cosine distances");
  std::string crl_vectors, crl_graph, crl_out;
  crl->add_option("--vectors", crl_vectors, "vector matrix with <path>.manifest")->required();
  crl->add_option("--graph", crl_graph, "graph document")->required();
  crl->add_option("--out", crl_out, "report to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    Outputs out;
    if (*fit) {
      auto a = load_attrs(fit_attrs);
      const auto cfg = fit_solver.config(threads);
      iaip_graph* raw = nullptr;
      check(iaip_fit_graph(a.get(), &cfg, &raw), "fit");
      Graph g(raw);
      iaip_buffer* doc = nullptr;
      check(iaip_graph_write(g.get(), &doc), "write graph");
      iaip_buffer* diag = nullptr;
      check(iaip_graph_diagnostics(g.get(), &diag), "diagnostics");
      Buffer d(doc), dg(diag);
      json j = provenance("fit");
      j["attrs"] = fit_attrs;
      j["out"] = fit_out;
      fit_solver.record(j, true);
      j["nodes"] = iaip_graph_size(g.get());
      j["edges"] = iaip_graph_edge_count(g.get());
      j["components"] = iaip_graph_components(g.get());
      j["graph_digest"] = graph_digest(g);
      out.add(fit_out, bytes_of(d));
      out.add(fit_out + ".diagnostics.csv", bytes_of(dg));
      out.add(config_path(fit_out), dump(j));
    } else if (*sel) {
      auto a = load_attrs(sel_attrs);
      const auto cfg = sel_solver.config(threads);
      iaip_sweep* raw = nullptr;
      check(iaip_select_gamma(a.get(), sel_grid.c_str(), &cfg, &raw), "select-gamma");
      Sweep s(raw);
      iaip_buffer* rep = nullptr;
      check(iaip_sweep_write(s.get(), &rep), "write report");
      Buffer r(rep);
      json j = provenance("select-gamma");
      j["attrs"] = sel_attrs;
      j["out"] = sel_out;
      j["grid"] = sel_grid;
      sel_solver.record(j, false);
      double g = 0.0;
      if (iaip_sweep_selected(s.get(), &g)) j["selected"] = g;
      else j["selected"] = nullptr;
      out.add(sel_out, bytes_of(r));
      out.add(config_path(sel_out), dump(j));
    } else if (*exp) {
      auto g = load_graph(exp_graph);
      const iaip_export_format f = exp_format == "graphml" ? IAIP_EXPORT_GRAPHML
                                   : exp_format == "dot"   ? IAIP_EXPORT_DOT
                                                           : IAIP_EXPORT_EDGE_CSV;
      iaip_buffer* b = nullptr;
      check(iaip_graph_export(g.get(), f, &b), "export");
      out.add(exp_out, bytes_of(Buffer(b)));
    } else if (*vec) {
      bool raw_in = false;
      auto lat = load_latents(vec_latents, &raw_in);
      auto a = load_attrs(vec_attrs);
      iaip_vectors* raw = nullptr;
      check(iaip_vectors_compute(lat.get(), a.get(), &raw), "vectors");
      Vectors v(raw);
      const auto f = resolve_format(vec_format, raw_in);
      store_vectors(out, v, nullptr, vec_out, f);
      json j = provenance("vectors");
      j["latents"] = vec_latents;
      j["attrs"] = vec_attrs;
      j["out"] = vec_out;
      j["format"] = format_name(f);
      out.add(config_path(vec_out), dump(j));
    } else if (*cor) {
      bool raw_in = false;
      auto v = load_vectors(cor_vectors, &raw_in);
      auto g = load_graph(cor_graph);
      iaip_vectors* raw = nullptr;
      check(iaip_vectors_correct(v.get(), g.get(), cor_mu, &raw), "correct");
      Vectors c(raw);
      const auto f = resolve_format(cor_format, raw_in);
      store_vectors(out, c, g.get(), cor_out, f);
      json j = provenance("correct");
      j["vectors"] = cor_vectors;
      j["graph"] = cor_graph;
      j["graph_digest"] = graph_digest(g);
      j["mu"] = cor_mu;
      j["out"] = cor_out;
      j["format"] = format_name(f);
      out.add(config_path(cor_out), dump(j));
    } else if (*apl) {
      auto v = load_vectors(apl_vectors);
      bool raw_in = false;
      auto lat = load_latents(apl_latent, &raw_in);
      if (apl_row >= iaip_latents_rows(lat.get()))
        input_error("--row " + std::to_string(apl_row) + " is out of range for '" + apl_latent + "' (" +
                    std::to_string(iaip_latents_rows(lat.get())) + " rows)");
      const iaip_mode mode = apl_mode == "mb" ? IAIP_MODE_MARKOV_BLANKET : IAIP_MODE_NAIVE;
      Graph g;
      if (mode == IAIP_MODE_MARKOV_BLANKET) {
        if (apl_graph.empty()) input_error("--graph is required in mb mode");
        g = load_graph(apl_graph);
      }
      std::vector<std::string> names;
      std::vector<double> alphas;
      parse_edits(apl_edits, names, alphas);
      std::vector<const char*> cnames;
      for (const auto& n : names) cnames.push_back(n.c_str());
      const std::size_t dim = iaip_latents_cols(lat.get());
      const double* z = iaip_latents_data(lat.get()) + apl_row * dim;
      std::vector<double> result(dim);
      check(iaip_apply(v.get(), g.get(), z, dim, cnames.data(), alphas.data(), names.size(), mode, apl_mu,
                       result.data()),
            "apply");
      iaip_latents* res = nullptr;
      check(iaip_latents_create(1, dim, result.data(), &res), "apply");
      Latents r(res);
      const auto f = resolve_format(apl_format, raw_in);
      iaip_buffer* b = nullptr;
      check(iaip_latents_write(r.get(), f, &b), "write latent");
      out.add(apl_out, bytes_of(Buffer(b)));
      json j = provenance("apply");
      j["vectors"] = apl_vectors;
      j["graph"] = apl_graph.empty() ? json(nullptr) : json(apl_graph);
      j["latent"] = apl_latent;
      j["row"] = apl_row;
      j["mode"] = apl_mode;
      j["mu"] = apl_mu;
      json edits = json::array();
      for (std::size_t e = 0; e < names.size(); ++e) edits.push_back({{"attr", names[e]}, {"alpha", alphas[e]}});
      j["edits"] = edits;
      j["out"] = apl_out;
      j["format"] = format_name(f);
      out.add(config_path(apl_out), dump(j));
    } else if (*crl) {
      auto v = load_vectors(crl_vectors);
      auto g = load_graph(crl_graph);
      iaip_correlation* raw = nullptr;
      check(iaip_correlate(v.get(), g.get(), &raw), "correlate");
      Correlation c(raw);
      iaip_buffer* b = nullptr;
      check(iaip_correlation_write(c.get(), &b), "write report");
      out.add(crl_out, bytes_of(Buffer(b)));
      json j = provenance("correlate");
      j["vectors"] = crl_vectors;
      j["graph"] = crl_graph;
      j["graph_digest"] = graph_digest(g);
      j["out"] = crl_out;
      out.add(config_path(crl_out), dump(j));
    }
    out.commit();
  } catch (const Failure& f) {
    std::cerr << "iaip: " << f.message << '\n';
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "iaip: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}
