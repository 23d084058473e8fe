#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iaip/attr_io.hpp"
#include "iaip/elasso.hpp"

namespace iaip::graph {

// Pairwise binary Markov random field over the attributes. `weights` is a
// dense symmetric M x M matrix (row-major) with zero diagonal; an edge exists
// exactly where the weight is nonzero.
class IsingGraph {
 public:
  IsingGraph(std::vector<std::string> names, std::vector<double> thresholds,
             std::vector<double> weights, double gamma, std::vector<double> lambdas);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<double>& thresholds() const noexcept { return thresholds_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<double>& lambdas() const noexcept { return lambdas_; }
  double gamma() const noexcept { return gamma_; }

  double weight(std::size_t j, std::size_t k) const noexcept { return weights_[j * size() + k]; }

  // Nonzero-weight neighbours of j in ascending order (its Markov blanket).
  std::vector<std::size_t> neighbours(std::size_t j) const;
  std::size_t edge_count() const noexcept;

  // Row j of the weight matrix without the diagonal, in elasso slot order.
  std::vector<double> node_betas(std::size_t j) const;

  friend bool operator==(const IsingGraph&, const IsingGraph&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<double> thresholds_;
  std::vector<double> weights_;
  double gamma_;
  std::vector<double> lambdas_;
};

// AND rule: w_jk = (b_jk + b_kj) / 2 when both are nonzero, else 0.
IsingGraph symmetrize(std::span<const elasso::NodewiseFit> fits, std::vector<std::string> names,
                      double gamma);

struct Connectivity {
  std::size_t components = 0;
  std::size_t isolated = 0;
  bool connected() const noexcept { return components == 1; }
};

Connectivity connected(const IsingGraph& g);

struct FittedGraph {
  IsingGraph graph;
  std::vector<elasso::NodewiseFit> fits;
};

// Full eLasso pipeline at a single gamma (cfg.gamma).
FittedGraph fit_graph(const io::AttributeMatrix& a, const elasso::FitConfig& cfg, std::size_t threads = 1);

// Re-selection on cached paths; no refitting.
FittedGraph graph_from_paths(std::span<const elasso::RegularizationPath> paths,
                             std::vector<std::string> names, double gamma);

struct GammaSweepRow {
  double gamma = 0.0;
  std::size_t edges = 0;
  std::size_t isolated = 0;
  std::size_t components = 0;
};

struct GammaSweepReport {
  std::vector<GammaSweepRow> rows;
  std::optional<double> selected;  // largest gamma whose graph is connected
};

// "start:stop:step", inclusive of stop (within 1e-9 * step).
std::vector<double> parse_gamma_grid(std::string_view spec);

GammaSweepReport sweep_gamma(std::span<const elasso::RegularizationPath> paths,
                             const std::vector<std::string>& names, std::span<const double> grid);
GammaSweepReport select_gamma(const io::AttributeMatrix& a, std::span<const double> grid,
                              const elasso::FitConfig& cfg, std::size_t threads = 1);

// CSV: gamma,edges,isolated,components,connected then "# selected=<g|none>".
std::string write_sweep_report(const GammaSweepReport& r);

// sum_j tau_j a_j + sum_{j<k} w_jk a_j a_k
double joint_log_unnorm(const IsingGraph& g, std::span<const double> a);

// n exact draws by enumerating all 2^M states (M <= 20). Deterministic in seed.
io::AttributeMatrix sample_ising_exact(const IsingGraph& g, std::size_t n, std::uint64_t seed);
inline constexpr std::size_t kMaxExactNodes = 20;

enum class ExportFormat { GraphML, Dot, EdgeCsv };

std::string export_graph(const IsingGraph& g, ExportFormat format);

// Weight matrix back from an edge-csv export; names fix the node order.
std::vector<double> import_edge_csv(std::string_view text, const std::vector<std::string>& names);

// Self-describing text document; write(read(doc)) == doc.
std::string write_graph_document(const IsingGraph& g);
IsingGraph read_graph_document(std::string_view text);

// Per-node table: attribute,threshold,penalty,neighbours,ebic,loglik,path_index.
// `neighbours` counts the symmetrized (AND-rule) blanket.
std::string write_fit_diagnostics(const FittedGraph& f);

// FNV-1a 64 of the graph document, as 16 lowercase hex digits.
std::string graph_digest(const IsingGraph& g);

}  // namespace iaip::graph
